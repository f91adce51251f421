/** Fixed-interval polling that never overlaps a slow previous run. */

export interface Poller {
  stop(): void;
  /** Run one cycle immediately (also used by tests instead of timers). */
  tick(): Promise<void>;
}

export function startPolling(
  task: () => Promise<void>,
  intervalMs = 5000,
): Poller {
  let busy = false;
  let stopped = false;

  const tick = async () => {
    if (busy || stopped) return;
    busy = true;
    try {
      await task();
    } catch (error) {
      console.error("poll failed:", error);
    } finally {
      busy = false;
    }
  };

  const timer = setInterval(tick, intervalMs);
  void tick();
  return {
    stop() {
      stopped = true;
      clearInterval(timer);
    },
    tick,
  };
}
