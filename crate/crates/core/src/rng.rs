//! Counter-based Gaussian streams.
//!
//! Every draw is addressed by `(master_seed, path_id, step, mode)`: the
//! ChaCha stream is selected by `path_id` and the word position by
//! `(step, mode)`, so a value never depends on which other values were drawn
//! before it or on the thread that drew it.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Largest number of modes addressable per time step.
pub const MAX_MODES: usize = 1 << 16;
const WORDS_PER_NORMAL: u128 = 4;
const STEP_OFFSET: i128 = 1 << 40;

/// Domain separation between increment streams and auxiliary sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Increments,
    InitialState,
    Sampling,
}

impl Purpose {
    fn tweak(self) -> u64 {
        match self {
            Purpose::Increments => 0,
            Purpose::InitialState => 0x9e37_79b9_7f4a_7c15,
            Purpose::Sampling => 0xc2b2_ae3d_27d4_eb4f,
        }
    }
}

pub fn stream(master_seed: u64, path_id: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed ^ purpose.tweak());
    rng.set_stream(path_id);
    rng
}

/// Uniform in `(0, 1]` from 53 random bits.
fn open_unit(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal by Box-Muller; consumes exactly four 32-bit words.
pub fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1 = open_unit(rng);
    let u2 = open_unit(rng);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Addressable N(0, 1) draws for one path.
pub struct IncrementStream {
    rng: ChaCha8Rng,
}

impl IncrementStream {
    pub fn new(master_seed: u64, path_id: u64) -> Self {
        Self {
            rng: stream(master_seed, path_id, Purpose::Increments),
        }
    }

    /// Fills `out` with the standard normals of modes `0..out.len()` at `step`.
    pub fn fill_step(&mut self, step: i64, out: &mut [f64]) -> Result<()> {
        if out.len() > MAX_MODES {
            return Err(Error::Size(format!(
                "{} modes exceed the addressable {MAX_MODES}",
                out.len()
            )));
        }
        let slot = i128::from(step) + STEP_OFFSET;
        if slot < 0 {
            return Err(Error::Size(format!("step index {step} out of range")));
        }
        let pos = slot as u128 * (MAX_MODES as u128) * WORDS_PER_NORMAL;
        self.rng.set_word_pos(pos);
        for z in out.iter_mut() {
            *z = standard_normal(&mut self.rng);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draws_are_addressable() {
        let mut a = IncrementStream::new(7, 3);
        let mut b = IncrementStream::new(7, 3);
        let mut x = [0.0; 5];
        let mut y = [0.0; 5];
        let mut skip = [0.0; 2];
        a.fill_step(10, &mut x).unwrap();
        b.fill_step(-4, &mut skip).unwrap();
        b.fill_step(10, &mut y).unwrap();
        assert_eq!(x, y);
        // a prefix of modes is stable under the number of modes drawn
        let mut z = [0.0; 3];
        b.fill_step(10, &mut z).unwrap();
        assert_eq!(&x[..3], &z);
    }

    #[test]
    fn streams_differ_across_paths() {
        let mut a = IncrementStream::new(7, 0);
        let mut b = IncrementStream::new(7, 1);
        let mut x = [0.0; 4];
        let mut y = [0.0; 4];
        a.fill_step(0, &mut x).unwrap();
        b.fill_step(0, &mut y).unwrap();
        assert_ne!(x, y);
    }
}
