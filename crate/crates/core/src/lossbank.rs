//! Per-sample momentum loss register and rank-based difficulty.
//!
//! The bank holds one smoothed loss `V_i` per training sample. Each write
//! blends the previous value with the new loss, `V_i ← λ·V_i + (1−λ)·L`.
//! Difficulty of a query loss is the fraction of bank entries strictly below
//! it, so a loss above everything in the bank scores 1 and a loss below
//! everything scores 0. Ties count as "not below".
//!
//! The printed rank formula this derives from counts entries *above* the
//! loss, which would rate low-loss samples as hard; the direction here is the
//! one consistent with augmenting easy samples and leaving hard ones intact.

use crate::error::{ensure_finite, Error, Result};

/// Loss rank in `[0, 1]`; higher is harder.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct DifficultyDegree(f64);

impl DifficultyDegree {
    pub fn new(d: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&d) {
            return Err(Error::invalid(format!("difficulty {d} outside [0, 1]")));
        }
        Ok(DifficultyDegree(d))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossBank {
    values: Vec<f64>,
    seen: Vec<bool>,
    lambda: f64,
    alpha: f64,
}

impl LossBank {
    /// `n` slots, all set to `alpha`.
    pub fn new(n: usize, alpha: f64, lambda: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("loss bank needs at least one slot"));
        }
        ensure_finite("loss bank alpha", alpha)?;
        if !(0.0..1.0).contains(&lambda) {
            return Err(Error::invalid(format!("lambda must be in [0, 1), got {lambda}")));
        }
        Ok(LossBank { values: vec![alpha; n], seen: vec![false; n], lambda, alpha })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn seen(&self) -> &[bool] {
        &self.seen
    }

    pub fn value(&self, id: usize) -> Result<f64> {
        self.values.get(id).copied().ok_or(Error::IdOutOfRange { id, len: self.len() })
    }

    /// Momentum write for sample `id`.
    pub fn update(&mut self, id: usize, loss: f64) -> Result<()> {
        let len = self.len();
        if id >= len {
            return Err(Error::IdOutOfRange { id, len });
        }
        ensure_finite("loss", loss)?;
        let v = &mut self.values[id];
        *v = self.lambda * *v + (1.0 - self.lambda) * loss;
        self.seen[id] = true;
        Ok(())
    }

    /// Fraction of entries strictly below `loss`. Linear scan.
    pub fn difficulty(&self, loss: f64) -> Result<DifficultyDegree> {
        ensure_finite("loss", loss)?;
        let below = self.values.iter().filter(|&&v| v < loss).count();
        Ok(DifficultyDegree(below as f64 / self.len() as f64))
    }

    /// Sorted copy for `O(log N)` queries against a frozen bank.
    pub fn sorted_index(&self) -> SortedBank {
        let mut sorted = self.values.clone();
        sorted.sort_by(f64::total_cmp);
        SortedBank { sorted }
    }

    /// Serialized form: `N u64, λ f64, α f64, N × f64 values, ⌈N/8⌉ seen bytes`,
    /// all little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.len();
        let mut out = Vec::with_capacity(24 + 8 * n + n.div_ceil(8));
        out.extend_from_slice(&(n as u64).to_le_bytes());
        out.extend_from_slice(&self.lambda.to_le_bytes());
        out.extend_from_slice(&self.alpha.to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let mut bits = vec![0u8; n.div_ceil(8)];
        for (i, &s) in self.seen.iter().enumerate() {
            if s {
                bits[i / 8] |= 1 << (i % 8);
            }
        }
        out.extend_from_slice(&bits);
        out
    }

    /// Inverse of [`to_bytes`](Self::to_bytes); returns the bank and the
    /// number of bytes consumed.
    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, usize)> {
        let short = || Error::Format("truncated loss bank".into());
        let word = |at: usize| -> Result<[u8; 8]> {
            bytes.get(at..at + 8).map(|b| b.try_into().expect("8 bytes")).ok_or_else(short)
        };
        let n = u64::from_le_bytes(word(0)?) as usize;
        let lambda = f64::from_le_bytes(word(8)?);
        let alpha = f64::from_le_bytes(word(16)?);
        let mut bank =
            LossBank::new(n, alpha, lambda).map_err(|e| Error::Format(format!("invalid loss bank header: {e}")))?;
        for i in 0..n {
            let v = f64::from_le_bytes(word(24 + 8 * i)?);
            bank.values[i] = ensure_finite("loss bank value", v).map_err(|e| Error::Format(e.to_string()))?;
        }
        let bits_at = 24 + 8 * n;
        let bits = bytes.get(bits_at..bits_at + n.div_ceil(8)).ok_or_else(short)?;
        for i in 0..n {
            bank.seen[i] = bits[i / 8] & (1 << (i % 8)) != 0;
        }
        Ok((bank, bits_at + n.div_ceil(8)))
    }
}

/// A frozen, sorted snapshot of a [`LossBank`].
#[derive(Debug, Clone)]
pub struct SortedBank {
    sorted: Vec<f64>,
}

impl SortedBank {
    pub fn difficulty(&self, loss: f64) -> Result<DifficultyDegree> {
        ensure_finite("loss", loss)?;
        let below = self.sorted.partition_point(|&v| v < loss);
        Ok(DifficultyDegree(below as f64 / self.sorted.len() as f64))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bank_of(values: &[f64]) -> LossBank {
        let mut b = LossBank::new(values.len(), 0.0, 0.0).unwrap();
        for (i, &v) in values.iter().enumerate() {
            b.update(i, v).unwrap();
        }
        b
    }

    #[test]
    fn init_fills_alpha() {
        let b = LossBank::new(4, 1.3863, 0.9).unwrap();
        assert_eq!(b.values(), &[1.3863; 4]);
        assert!(b.seen().iter().all(|s| !s));
        assert!(LossBank::new(0, 1.0, 0.9).is_err());
        assert!(LossBank::new(3, 1.0, 1.0).is_err());
    }

    #[test]
    fn momentum_update_direct_value() {
        let mut b = LossBank::new(3, 1.0, 0.9).unwrap();
        b.update(1, 2.0).unwrap();
        assert!((b.values()[1] - 1.1).abs() < 1e-15);
        assert_eq!(b.values()[0], 1.0);
        assert_eq!(b.values()[2], 1.0);
        assert!(b.seen()[1] && !b.seen()[0]);
    }

    #[test]
    fn zero_lambda_keeps_last_loss() {
        let mut b = LossBank::new(2, 123.0, 0.0).unwrap();
        b.update(0, 7.0).unwrap();
        assert_eq!(b.values()[0], 7.0);
    }

    #[test]
    fn constant_stream_converges_geometrically() {
        let (alpha, lambda, c) = (4f64.ln(), 0.9, 0.2);
        let mut b = LossBank::new(1, alpha, lambda).unwrap();
        for t in 1..=100 {
            b.update(0, c).unwrap();
            let want = lambda.powi(t) * (alpha - c);
            assert!(((b.values()[0] - c).abs() - want.abs()).abs() < 1e-12);
        }
    }

    #[test]
    fn bad_updates_fail() {
        let mut b = LossBank::new(2, 1.0, 0.5).unwrap();
        assert!(matches!(b.update(2, 1.0), Err(Error::IdOutOfRange { id: 2, len: 2 })));
        assert!(matches!(b.update(0, f64::NAN), Err(Error::NonFinite { .. })));
        assert!(b.difficulty(f64::INFINITY).is_err());
    }

    #[test]
    fn difficulty_extremes_and_middle() {
        let b = bank_of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(b.difficulty(5.0).unwrap().value(), 1.0);
        assert_eq!(b.difficulty(0.0).unwrap().value(), 0.0);
        assert_eq!(b.difficulty(2.5).unwrap().value(), 0.5);
        // ties are not below
        assert_eq!(b.difficulty(2.0).unwrap().value(), 0.25);
    }

    #[test]
    fn checkpoint_bytes_round_trip() {
        let mut b = LossBank::new(11, 0.5, 0.8).unwrap();
        b.update(3, 2.0).unwrap();
        b.update(9, 0.1).unwrap();
        let bytes = b.to_bytes();
        let (back, used) = LossBank::from_bytes(&bytes).unwrap();
        assert_eq!(back, b);
        assert_eq!(used, bytes.len());
        assert!(LossBank::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }

    proptest! {
        #[test]
        fn sorted_index_agrees_with_scan(
            values in prop::collection::vec(-5.0f64..5.0, 1..200),
            queries in prop::collection::vec(-6.0f64..6.0, 1..20),
        ) {
            let b = bank_of(&values);
            let s = b.sorted_index();
            for q in queries {
                prop_assert_eq!(b.difficulty(q).unwrap(), s.difficulty(q).unwrap());
            }
        }

        #[test]
        fn rank_is_scale_invariant(
            values in prop::collection::vec(0.0f64..10.0, 1..100),
            q in 0.0f64..10.0,
            e in -20i32..20,
        ) {
            // powers of two scale without rounding, so order is preserved exactly
            let k = 2f64.powi(e);
            let scaled: Vec<f64> = values.iter().map(|v| v * k).collect();
            prop_assert_eq!(
                bank_of(&values).difficulty(q).unwrap(),
                bank_of(&scaled).difficulty(q * k).unwrap()
            );
        }

        #[test]
        fn difficulty_is_monotone(
            values in prop::collection::vec(-3.0f64..3.0, 1..100),
            a in -4.0f64..4.0,
            b in -4.0f64..4.0,
        ) {
            let bank = bank_of(&values);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(bank.difficulty(lo).unwrap() <= bank.difficulty(hi).unwrap());
        }
    }
}
