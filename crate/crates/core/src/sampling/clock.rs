use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

/// One-shot stop flag that can be triggered from any thread.
#[derive(Debug, Clone, Default)]
pub struct StopSignal {
    inner: Arc<(Mutex<bool>, Condvar)>,
}

impl StopSignal {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn trigger(&self) {
        let (lock, cvar) = &*self.inner;
        *lock.lock().unwrap() = true;
        cvar.notify_all();
    }

    pub fn is_triggered(&self) -> bool {
        *self.inner.0.lock().unwrap()
    }

    /// Waits up to `timeout`; returns `true` as soon as the signal fires.
    pub fn wait_timeout(&self, timeout: Duration) -> bool {
        let (lock, cvar) = &*self.inner;
        let guard = lock.lock().unwrap();
        let (guard, _) = cvar
            .wait_timeout_while(guard, timeout, |stopped| !*stopped)
            .unwrap();
        *guard
    }
}

/// Time source for the sampling loop. Times are seconds from an arbitrary
/// origin; only differences matter.
pub trait Clock: Send + Sync {
    fn now_s(&self) -> f64;

    /// Blocks until `deadline_s` or until `stop` fires. Returns `true` when
    /// the caller should stop sampling.
    fn wait_until(&self, deadline_s: f64, stop: &StopSignal) -> bool;
}

/// Real elapsed time.
#[derive(Debug, Clone)]
pub struct MonotonicClock {
    origin: Instant,
}

impl MonotonicClock {
    pub fn new() -> Self {
        Self {
            origin: Instant::now(),
        }
    }
}

impl Default for MonotonicClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for MonotonicClock {
    fn now_s(&self) -> f64 {
        self.origin.elapsed().as_secs_f64()
    }

    fn wait_until(&self, deadline_s: f64, stop: &StopSignal) -> bool {
        let remaining = deadline_s - self.now_s();
        if remaining <= 0.0 {
            return stop.is_triggered();
        }
        stop.wait_timeout(Duration::from_secs_f64(remaining))
    }
}

/// Simulated time that jumps straight to each deadline.
///
/// A stop time can be armed with [`VirtualClock::stop_at`]; waiting past it
/// parks the clock exactly on the stop time and reports a stop. This is how
/// a scripted workload of known duration ends its sampling loop.
#[derive(Debug, Default)]
pub struct VirtualClock {
    now_bits: AtomicU64,
    stop_bits: AtomicU64,
}

const NO_STOP: u64 = u64::MAX;

impl VirtualClock {
    pub fn new(start_s: f64) -> Self {
        Self {
            now_bits: AtomicU64::new(start_s.to_bits()),
            stop_bits: AtomicU64::new(NO_STOP),
        }
    }

    pub fn set(&self, t: f64) {
        self.now_bits.store(t.to_bits(), Ordering::SeqCst);
    }

    pub fn advance(&self, dt: f64) {
        self.set(self.now_s() + dt);
    }

    pub fn stop_at(&self, t: Option<f64>) {
        self.stop_bits
            .store(t.map_or(NO_STOP, f64::to_bits), Ordering::SeqCst);
    }

    fn stop_time(&self) -> Option<f64> {
        match self.stop_bits.load(Ordering::SeqCst) {
            NO_STOP => None,
            bits => Some(f64::from_bits(bits)),
        }
    }
}

impl Clock for VirtualClock {
    fn now_s(&self) -> f64 {
        f64::from_bits(self.now_bits.load(Ordering::SeqCst))
    }

    fn wait_until(&self, deadline_s: f64, stop: &StopSignal) -> bool {
        if stop.is_triggered() {
            return true;
        }
        match self.stop_time() {
            Some(end) if deadline_s >= end - 1e-9 => {
                self.set(end);
                true
            }
            _ => {
                if deadline_s > self.now_s() {
                    self.set(deadline_s);
                }
                false
            }
        }
    }
}
