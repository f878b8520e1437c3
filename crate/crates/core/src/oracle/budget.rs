use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use crate::error::{Error, Result};

pub const DEFAULT_LIMIT: u64 = 1000;
pub const DEFAULT_WINDOW: Duration = Duration::from_secs(24 * 60 * 60);

/// Time source measured from an arbitrary fixed origin.
pub trait Clock: Send + Sync {
    fn now(&self) -> Duration;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .unwrap_or_default()
    }
}

/// Test clock that only moves when told to.
#[derive(Debug, Default)]
pub struct ManualClock {
    millis: AtomicU64,
}

impl ManualClock {
    pub fn new(start: Duration) -> Self {
        Self {
            millis: AtomicU64::new(start.as_millis() as u64),
        }
    }

    pub fn advance(&self, by: Duration) {
        self.millis.fetch_add(by.as_millis() as u64, Ordering::SeqCst);
    }

    pub fn set(&self, to: Duration) {
        self.millis.store(to.as_millis() as u64, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Duration {
        Duration::from_millis(self.millis.load(Ordering::SeqCst))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Allow { remaining: u64 },
    Deny { retry_after: Duration },
}

/// Fixed-window call counter: at most `limit` calls per `window`.
///
/// Windows are aligned to `window_start + i * window`; the count resets to
/// zero on rollover.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryBudget {
    limit: u64,
    window: Duration,
    consumed: u64,
    window_start: Duration,
}

impl QueryBudget {
    pub fn new(limit: u64, window: Duration, start: Duration) -> Result<Self> {
        if window.is_zero() {
            return Err(Error::validation("rate-limit window must be positive"));
        }
        Ok(Self {
            limit,
            window,
            consumed: 0,
            window_start: start,
        })
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn window(&self) -> Duration {
        self.window
    }

    pub fn consumed(&self) -> u64 {
        self.consumed
    }

    pub fn window_start(&self) -> Duration {
        self.window_start
    }

    fn roll(&mut self, now: Duration) {
        if now >= self.window_start + self.window {
            let elapsed = (now - self.window_start).as_nanos();
            let windows = elapsed / self.window.as_nanos();
            let advance = self.window.as_nanos() * windows;
            self.window_start += Duration::from_nanos(advance as u64);
            self.consumed = 0;
        }
    }

    /// Calls left in the window containing `now`.
    pub fn remaining(&mut self, now: Duration) -> u64 {
        self.roll(now);
        self.limit - self.consumed
    }

    pub fn check_and_consume(&mut self, now: Duration) -> Decision {
        self.roll(now);
        if self.consumed < self.limit {
            self.consumed += 1;
            Decision::Allow {
                remaining: self.limit - self.consumed,
            }
        } else {
            let window_end = self.window_start + self.window;
            Decision::Deny {
                retry_after: window_end.saturating_sub(now),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DAY: Duration = DEFAULT_WINDOW;

    #[test]
    fn thousand_calls_per_day() {
        let mut b = QueryBudget::new(1000, DAY, Duration::ZERO).unwrap();
        let now = Duration::from_secs(5);
        for i in 1..=1000 {
            assert_eq!(b.check_and_consume(now), Decision::Allow { remaining: 1000 - i });
        }
        assert_eq!(
            b.check_and_consume(now),
            Decision::Deny {
                retry_after: DAY - now
            }
        );
        assert_eq!(b.consumed(), 1000);
        assert!(matches!(b.check_and_consume(now + DAY), Decision::Allow { remaining: 999 }));
    }

    #[test]
    fn zero_limit_denies_everything() {
        let mut b = QueryBudget::new(0, DAY, Duration::ZERO).unwrap();
        for t in [0, 10, 100_000, 1_000_000] {
            assert!(matches!(
                b.check_and_consume(Duration::from_secs(t)),
                Decision::Deny { .. }
            ));
        }
    }

    #[test]
    fn windows_stay_aligned() {
        let mut b = QueryBudget::new(1, Duration::from_secs(10), Duration::ZERO).unwrap();
        assert!(matches!(b.check_and_consume(Duration::from_secs(3)), Decision::Allow { .. }));
        assert!(matches!(b.check_and_consume(Duration::from_secs(25)), Decision::Allow { .. }));
        assert_eq!(b.window_start(), Duration::from_secs(20));
        assert_eq!(
            b.check_and_consume(Duration::from_secs(26)),
            Decision::Deny {
                retry_after: Duration::from_secs(4)
            }
        );
    }

    #[test]
    fn zero_window_is_rejected() {
        assert!(QueryBudget::new(5, Duration::ZERO, Duration::ZERO).is_err());
    }
}
