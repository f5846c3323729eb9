/**
 * Stale-response protection. Concurrent requests for the same resource key
 * may resolve out of order; only the newest one may update the view, so
 * older completions resolve to null and callers drop them.
 */

export class RequestSequencer {
  private latest = new Map<string, number>();
  private counter = 0;

  async run<T>(key: string, op: () => Promise<T>): Promise<T | null> {
    const ticket = ++this.counter;
    this.latest.set(key, ticket);
    const result = await op();
    return this.latest.get(key) === ticket ? result : null;
  }

  /** Invalidate outstanding requests for a key (e.g. after a mutation). */
  invalidate(key: string): void {
    this.latest.set(key, ++this.counter);
  }
}
