use std::collections::VecDeque;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

/// Monotonic time source; swapped for [`VirtualClock`] in tests.
pub trait Clock: Send + Sync {
    fn now(&self) -> Duration;
    fn sleep(&self, d: Duration);
}

#[derive(Debug)]
pub struct SystemClock {
    origin: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        Self {
            origin: Instant::now(),
        }
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }

    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Clock whose `sleep` advances time instantly.
#[derive(Debug, Default)]
pub struct VirtualClock {
    now: Mutex<Duration>,
    slept: Mutex<Vec<Duration>>,
}

impl VirtualClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn advance(&self, d: Duration) {
        *self.now.lock().unwrap() += d;
    }

    pub fn sleeps(&self) -> Vec<Duration> {
        self.slept.lock().unwrap().clone()
    }
}

impl Clock for VirtualClock {
    fn now(&self) -> Duration {
        *self.now.lock().unwrap()
    }

    fn sleep(&self, d: Duration) {
        self.slept.lock().unwrap().push(d);
        self.advance(d);
    }
}

pub const RATE_WINDOW: Duration = Duration::from_secs(60);

/// Sliding-window limiter: at most `per_minute` acquisitions in any
/// 60-second window. `None` disables limiting.
pub struct RateLimiter {
    per_minute: Option<u32>,
    starts: Mutex<VecDeque<Duration>>,
    clock: Arc<dyn Clock>,
}

impl RateLimiter {
    pub fn new(per_minute: Option<u32>, clock: Arc<dyn Clock>) -> Self {
        Self {
            per_minute: per_minute.filter(|&n| n > 0),
            starts: Mutex::new(VecDeque::new()),
            clock,
        }
    }

    /// Blocks until a call may start and records its start time.
    pub fn acquire(&self) -> Duration {
        let Some(limit) = self.per_minute else {
            return self.clock.now();
        };
        loop {
            let wait = {
                let mut starts = self.starts.lock().unwrap();
                let now = self.clock.now();
                while starts.front().is_some_and(|&t| t + RATE_WINDOW <= now) {
                    starts.pop_front();
                }
                if starts.len() < limit as usize {
                    starts.push_back(now);
                    return now;
                }
                starts[0] + RATE_WINDOW - now
            };
            self.clock.sleep(wait);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn never_more_than_limit_in_any_window() {
        let clock = Arc::new(VirtualClock::new());
        let limiter = RateLimiter::new(Some(10), clock.clone());
        let mut starts = Vec::new();
        for i in 0..55 {
            if i % 7 == 0 {
                clock.advance(Duration::from_millis(1300));
            }
            starts.push(limiter.acquire());
        }
        for (i, &t) in starts.iter().enumerate() {
            let in_window = starts[i..].iter().take_while(|&&s| s < t + RATE_WINDOW).count();
            assert!(in_window <= 10, "{in_window} calls within 60s of {t:?}");
        }
        assert!(!clock.sleeps().is_empty());
    }

    #[test]
    fn unlimited() {
        let clock = Arc::new(VirtualClock::new());
        let limiter = RateLimiter::new(None, clock.clone());
        for _ in 0..1000 {
            limiter.acquire();
        }
        assert!(clock.sleeps().is_empty());
    }
}
