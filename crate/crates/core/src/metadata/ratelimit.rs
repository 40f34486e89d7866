use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

/// Time source for rate limiting and cache expiry.
pub trait Clock: Send + Sync {
    /// Monotonic time since an arbitrary origin.
    fn now(&self) -> Duration;
    fn sleep(&self, d: Duration);
    fn unix_secs(&self) -> u64;
}

#[derive(Debug)]
pub struct SystemClock {
    origin: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        SystemClock { origin: Instant::now() }
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }

    fn sleep(&self, d: Duration) {
        std::thread::sleep(d)
    }

    fn unix_secs(&self) -> u64 {
        SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
    }
}

/// Deterministic clock: `sleep` advances time instantly.
#[derive(Debug, Default)]
pub struct ManualClock {
    now: Mutex<Duration>,
    unix_base: u64,
}

impl ManualClock {
    pub fn new(unix_base: u64) -> Self {
        ManualClock { now: Mutex::new(Duration::ZERO), unix_base }
    }

    pub fn advance(&self, d: Duration) {
        *self.now.lock().unwrap() += d;
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Duration {
        *self.now.lock().unwrap()
    }

    fn sleep(&self, d: Duration) {
        self.advance(d)
    }

    fn unix_secs(&self) -> u64 {
        self.unix_base + self.now().as_secs()
    }
}

/// Spaces requests at least `1 / rate` seconds apart.
pub struct RateLimiter {
    interval: Duration,
    next_allowed: Mutex<Duration>,
    clock: Arc<dyn Clock>,
}

impl RateLimiter {
    pub fn new(requests_per_sec: f64, clock: Arc<dyn Clock>) -> Self {
        assert!(requests_per_sec > 0.0, "rate must be positive");
        let nanos = (1e9 / requests_per_sec).ceil() as u64;
        RateLimiter { interval: Duration::from_nanos(nanos), next_allowed: Mutex::new(Duration::ZERO), clock }
    }

    /// Blocks until a request slot is available and returns its start time.
    pub fn acquire(&self) -> Duration {
        let mut next = self.next_allowed.lock().unwrap();
        let mut now = self.clock.now();
        if now < *next {
            self.clock.sleep(*next - now);
            now = self.clock.now().max(*next);
        }
        *next = now + self.interval;
        now
    }
}
