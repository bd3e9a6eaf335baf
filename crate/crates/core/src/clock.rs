//! Time sources and a sliding-window rate limiter.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

pub trait Clock: Send + Sync {
    /// Milliseconds since the Unix epoch.
    fn now_ms(&self) -> u64;
    fn sleep_ms(&self, ms: u64);

    fn now_secs(&self) -> u64 {
        self.now_ms() / 1000
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
    }

    fn sleep_ms(&self, ms: u64) {
        std::thread::sleep(Duration::from_millis(ms));
    }
}

/// Manually driven clock. Sleeping advances time instantly.
#[derive(Debug, Default)]
pub struct SimClock {
    now: AtomicU64,
}

impl SimClock {
    pub fn starting_at(ms: u64) -> Self {
        Self { now: AtomicU64::new(ms) }
    }

    pub fn advance(&self, ms: u64) {
        self.now.fetch_add(ms, Ordering::SeqCst);
    }
}

impl Clock for SimClock {
    fn now_ms(&self) -> u64 {
        self.now.load(Ordering::SeqCst)
    }

    fn sleep_ms(&self, ms: u64) {
        self.advance(ms);
    }
}

pub const WINDOW_MS: u64 = 60_000;

/// Admits at most `limit` calls in any sliding window of `window_ms`.
/// A zero limit disables limiting.
pub struct RateLimiter {
    limit: u32,
    window_ms: u64,
    clock: Arc<dyn Clock>,
    recent: Mutex<VecDeque<u64>>,
}

impl RateLimiter {
    /// At most `per_minute` calls per 60 seconds.
    pub fn new(per_minute: u32, clock: Arc<dyn Clock>) -> Self {
        Self::with_window(per_minute, WINDOW_MS, clock)
    }

    pub fn per_second(per_second: u32, clock: Arc<dyn Clock>) -> Self {
        Self::with_window(per_second, 1_000, clock)
    }

    pub fn with_window(limit: u32, window_ms: u64, clock: Arc<dyn Clock>) -> Self {
        Self { limit, window_ms: window_ms.max(1), clock, recent: Mutex::new(VecDeque::new()) }
    }

    pub fn limit(&self) -> u32 {
        self.limit
    }

    /// Blocks until a call is admitted and returns its admission time.
    pub fn acquire(&self) -> u64 {
        loop {
            let wait = {
                let mut recent = self.recent.lock().unwrap_or_else(|e| e.into_inner());
                let now = self.clock.now_ms();
                if self.limit == 0 {
                    return now;
                }
                while recent.front().is_some_and(|&t| t + self.window_ms <= now) {
                    recent.pop_front();
                }
                if recent.len() < self.limit as usize {
                    recent.push_back(now);
                    return now;
                }
                recent[0] + self.window_ms - now
            };
            self.clock.sleep_ms(wait);
        }
    }
}
