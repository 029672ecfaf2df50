use parking_lot::{Condvar, Mutex};

/// Counting gate that bounds the number of in-flight backend requests.
#[derive(Debug)]
pub struct InFlightLimit {
    max: usize,
    active: Mutex<usize>,
    freed: Condvar,
}

pub struct Permit<'a> {
    limit: &'a InFlightLimit,
}

impl InFlightLimit {
    pub fn new(max: usize) -> Self {
        InFlightLimit {
            max: max.max(1),
            active: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    pub fn max(&self) -> usize {
        self.max
    }

    /// Blocks until a slot is free.
    pub fn acquire(&self) -> Permit<'_> {
        let mut active = self.active.lock();
        while *active >= self.max {
            self.freed.wait(&mut active);
        }
        *active += 1;
        Permit { limit: self }
    }

    pub fn active(&self) -> usize {
        *self.active.lock()
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.limit.active.lock() -= 1;
        self.limit.freed.notify_one();
    }
}
