"""Command-line client: registration, session protocol, spectrum sources."""
