//! Nonlinear random-projection encoder and dimension regeneration.
//!
//! Dimension `i` of a hypervector is `cos(B_i·F + c_i) · sin(B_i·F)`, with
//! `B_i` a standard normal base vector and `c_i` a uniform phase. Bases are
//! drawn row-major first, then the phases, all from the encoder stream of
//! [`crate::rng`].

use crate::error::{HdcError, Result};
use crate::model::{EncoderState, FeatureVector, Hypervector, RegenPlan};
use crate::rng::{streams, DrawStream};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[inline]
pub(crate) fn encode_dim(base: &[f64], phase: f64, f: &[f64]) -> f64 {
    let proj: f64 = base.iter().zip(f).map(|(b, x)| b * x).sum();
    (proj + phase).cos() * proj.sin()
}

impl EncoderState {
    /// Draws a fresh encoder from `seed`.
    pub fn init(seed: u64, n: usize, dim: usize) -> Result<Self> {
        if n == 0 || dim == 0 {
            return Err(HdcError::invalid("encoder needs n >= 1 and D >= 1"));
        }
        let mut rng = DrawStream::new(seed, streams::ENCODER);
        let bases = (0..n * dim).map(|_| rng.gaussian()).collect();
        let phases = (0..dim).map(|_| rng.phase()).collect();
        Ok(Self {
            n,
            dim,
            seed,
            draw_counter: rng.draws(),
            bases,
            phases,
        })
    }

    fn check_features(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.n {
            return Err(HdcError::invalid(format!(
                "feature vector has length {}, encoder expects {}",
                f.len(),
                self.n
            )));
        }
        if !f.iter().all(|v| v.is_finite()) {
            return Err(HdcError::invalid("non-finite feature"));
        }
        Ok(())
    }

    pub fn encode(&self, f: &FeatureVector) -> Result<Hypervector> {
        self.check_features(f)?;
        Ok(self.encode_unchecked(f))
    }

    pub(crate) fn encode_unchecked(&self, f: &[f64]) -> Hypervector {
        self.bases
            .chunks_exact(self.n)
            .zip(&self.phases)
            .map(|(row, &c)| encode_dim(row, c, f))
            .collect::<Vec<_>>()
            .into()
    }

    /// Encodes every sample; errors carry the failing sample's index.
    pub fn encode_batch(&self, batch: &[FeatureVector]) -> Result<Vec<Hypervector>> {
        for (index, f) in batch.iter().enumerate() {
            self.check_features(f).map_err(|e| HdcError::Sample {
                index,
                source: Box::new(e),
            })?;
        }
        #[cfg(feature = "parallel")]
        let out = batch.par_iter().map(|f| self.encode_unchecked(f)).collect();
        #[cfg(not(feature = "parallel"))]
        let out = batch.iter().map(|f| self.encode_unchecked(f)).collect();
        Ok(out)
    }

    fn check_plan(&self, plan: &RegenPlan) -> Result<()> {
        match plan.indices().last() {
            Some(&i) if i >= self.dim => Err(HdcError::invalid(format!(
                "plan index {i} out of range for D = {}",
                self.dim
            ))),
            _ => Ok(()),
        }
    }

    /// Redraws the base row and phase of every planned dimension.
    ///
    /// Draws continue the encoder stream at `draw_counter`; for each index in
    /// ascending order the `n` base entries are drawn, then the phase.
    pub fn regenerate_dims(&mut self, plan: &RegenPlan) -> Result<()> {
        self.check_plan(plan)?;
        if plan.is_empty() {
            return Ok(());
        }
        let mut rng = DrawStream::resume(self.seed, streams::ENCODER, self.draw_counter);
        for &i in plan.indices() {
            for b in &mut self.bases[i * self.n..(i + 1) * self.n] {
                *b = rng.gaussian();
            }
            self.phases[i] = rng.phase();
        }
        self.draw_counter = rng.draws();
        Ok(())
    }

    /// Recomputes only the planned entries of `h`.
    ///
    /// When `h` came from an encoder that agrees with `self` outside the plan,
    /// the result equals `self.encode(f)` exactly.
    pub fn reencode_dims(&self, f: &FeatureVector, h: &Hypervector, plan: &RegenPlan) -> Result<Hypervector> {
        self.check_features(f)?;
        self.check_plan(plan)?;
        if h.len() != self.dim {
            return Err(HdcError::invalid(format!(
                "hypervector has length {}, encoder has D = {}",
                h.len(),
                self.dim
            )));
        }
        let mut out = h.clone();
        self.reencode_in_place(f, out.as_mut_slice(), plan.indices());
        Ok(out)
    }

    pub(crate) fn reencode_in_place(&self, f: &[f64], h: &mut [f64], dims: &[usize]) {
        for &i in dims {
            h[i] = encode_dim(self.base(i), self.phases[i], f);
        }
    }

    /// Refreshes planned entries across a cache of encodings.
    pub(crate) fn reencode_cache(&self, features: &[&[f64]], cache: &mut [Hypervector], dims: &[usize]) {
        if dims.is_empty() {
            return;
        }
        #[cfg(feature = "parallel")]
        cache
            .par_iter_mut()
            .zip(features.par_iter())
            .for_each(|(h, f)| self.reencode_in_place(f, h.as_mut_slice(), dims));
        #[cfg(not(feature = "parallel"))]
        cache
            .iter_mut()
            .zip(features)
            .for_each(|(h, f)| self.reencode_in_place(f, h.as_mut_slice(), dims));
    }
}
