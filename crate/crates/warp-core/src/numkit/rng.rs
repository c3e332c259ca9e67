/// Counter-based splittable random number generator.
///
/// Every `(seed, stream_id, counter)` triple maps to one 64-bit draw through a
/// stateless mixing function, so a draw has a stable address independent of
/// batch order or platform. Streams derived with [`RngStream::substream`] are
/// independent of each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    counter: u64,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngStream {
            seed,
            stream,
            counter: 0,
        }
    }

    /// A fresh stream addressed relative to this one; the counter restarts.
    pub fn substream(&self, id: u64) -> Self {
        RngStream::new(self.seed, splitmix64(self.stream ^ splitmix64(id.wrapping_add(1))))
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    pub fn set_counter(&mut self, counter: u64) {
        self.counter = counter;
    }

    pub fn next_u64(&mut self) -> u64 {
        let c = self.counter;
        self.counter += 1;
        // Two mixing rounds decorrelate seed, stream and counter.
        splitmix64(splitmix64(self.seed ^ splitmix64(self.stream)).wrapping_add(c))
    }

    /// Uniform draw in `(0, 1]` (never exactly zero, safe under `ln`).
    pub fn next_f64(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 1.0) * (1.0 / 9007199254740992.0)
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * (self.next_f64() - f64::EPSILON).max(0.0)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() <= p
    }

    /// One standard-normal draw via Box-Muller. Consumes two uniforms so the
    /// counter advances by a fixed amount per call.
    pub fn normal(&mut self) -> f64 {
        let u1 = self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// `n` i.i.d. standard-normal draws.
    pub fn randn(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.normal()).collect()
    }
}
