//! Walk-on-spheres sampling of the harmonic measure of `R^2 \ K_depth` seen
//! from infinity.
//!
//! A walker starts uniformly on a circle enclosing the set and jumps to a
//! uniform point on the largest circle free of `K_depth` until it is within
//! `absorb_epsilon` of a square. Excursions beyond `outer_radius` are mapped
//! back onto `reentry_radius` by one draw from the exterior Poisson kernel,
//! which is the exact hitting law of that circle.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::address::CylinderAddress;
use crate::error::{Error, Result};
use crate::geometry::{set_center, set_radius, CantorGeometry};
use crate::real::Real;
use crate::rng::{RngStream, StreamFamily};
use crate::sequence::ScaleSequence;
use crate::table::{fingerprint, CylinderMeasureTable, TableHeader, TableSource, MAX_TABLE_DEPTH};

/// Largest tolerated discarded-walker fraction in a campaign.
pub const MAX_DISCARDED_FRACTION: f64 = 1e-3;

/// Walkers per scheduling batch; batches are the unit of parallel work.
const BATCH: u64 = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WosParams<T> {
    pub depth: usize,
    /// Absolute absorption distance.
    pub absorb_epsilon: T,
    pub start_radius: T,
    pub outer_radius: T,
    pub reentry_radius: T,
    pub max_steps: u64,
}

impl<T: Real> WosParams<T> {
    pub const DEFAULT_EPSILON_FRACTION: f64 = 1e-3;
    pub const DEFAULT_START_RADIUS: f64 = 8.0;
    pub const DEFAULT_OUTER_RADIUS: f64 = 16.0;
    pub const DEFAULT_REENTRY_RADIUS: f64 = 8.0;
    pub const DEFAULT_MAX_STEPS: u64 = 1_000_000;

    /// Defaults: `absorb_epsilon = 1e-3 l(depth)`, radii 8 / 16 / 8, `10^6` steps.
    pub fn defaults(seq: &ScaleSequence<T>, depth: usize) -> Self {
        Self {
            depth,
            absorb_epsilon: seq.sidelength(depth) * T::lit(Self::DEFAULT_EPSILON_FRACTION),
            start_radius: T::lit(Self::DEFAULT_START_RADIUS),
            outer_radius: T::lit(Self::DEFAULT_OUTER_RADIUS),
            reentry_radius: T::lit(Self::DEFAULT_REENTRY_RADIUS),
            max_steps: Self::DEFAULT_MAX_STEPS,
        }
    }

    pub fn validate(&self, seq: &ScaleSequence<T>) -> Result<()> {
        let l = seq.sidelength(self.depth);
        let bad = |m: String| Err(Error::InvalidParams(m));
        if self.depth > MAX_TABLE_DEPTH {
            return bad(format!("depth {} exceeds {MAX_TABLE_DEPTH}", self.depth));
        }
        if !(self.absorb_epsilon > T::zero() && self.absorb_epsilon < l / T::lit(4.0)) {
            return bad(format!(
                "absorb_epsilon {} must lie in (0, l(depth)/4 = {})",
                self.absorb_epsilon,
                l / T::lit(4.0)
            ));
        }
        if !(self.reentry_radius < self.outer_radius) {
            return bad("reentry_radius must be below outer_radius".into());
        }
        if !(self.start_radius <= self.reentry_radius) {
            return bad("start_radius must not exceed reentry_radius".into());
        }
        if !(self.start_radius > set_radius::<T>()) {
            return bad("start circle must enclose the unit square".into());
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive".into());
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "depth": self.depth,
            "absorb_epsilon": self.absorb_epsilon.as_f64(),
            "start_radius": self.start_radius.as_f64(),
            "outer_radius": self.outer_radius.as_f64(),
            "reentry_radius": self.reentry_radius.as_f64(),
            "max_steps": self.max_steps,
        })
    }
}

#[inline]
fn unit_vector<T: Real, R: Rng + ?Sized>(rng: &mut R) -> [T; 2] {
    let theta = T::lit(rng.random::<f64>()) * T::TAU();
    let (s, c) = theta.sin_cos();
    [c, s]
}

/// Exterior Poisson kernel draw: the point where Brownian motion from `p`
/// first hits the circle of radius `reentry_radius` about the set centre.
///
/// With `rho = |p - c| / R`, the angular density relative to the direction of
/// `p` is `(rho^2 - 1) / (2 pi (rho^2 - 2 rho cos phi + 1))`, i.e. the interior
/// Poisson kernel at radius `1/rho`, inverted in closed form.
pub fn exterior_reentry<T: Real, R: Rng + ?Sized>(
    p: [T; 2],
    reentry_radius: T,
    rng: &mut R,
) -> Result<[T; 2]> {
    let c = set_center::<T>();
    let (dx, dy) = (p[0] - c[0], p[1] - c[1]);
    let dist = dx.hypot(dy);
    if !(dist > reentry_radius) {
        return Err(Error::InsideReentryDisk {
            distance: dist.as_f64(),
            radius: reentry_radius.as_f64(),
        });
    }
    let phi = poisson_offset(reentry_radius / dist, T::lit(rng.random::<f64>()));
    let theta = dy.atan2(dx) + phi;
    let (s, co) = theta.sin_cos();
    Ok([c[0] + reentry_radius * co, c[1] + reentry_radius * s])
}

/// Inverse CDF of the Poisson kernel at radius `r < 1`: angle in `(-pi, pi)`.
#[inline]
pub(crate) fn poisson_offset<T: Real>(r: T, u: T) -> T {
    let two = T::lit(2.0);
    let k = (T::one() - r) / (T::one() + r);
    two * (k * (T::PI() * (u - T::lit(0.5))).tan()).atan()
}

/// Analytic CDF of the exterior kernel's angular offset: `P(phi <= x)`, `x` in `[-pi, pi]`.
pub fn reentry_offset_cdf(rho: f64, x: f64) -> f64 {
    let r = 1.0 / rho;
    0.5 + (((1.0 + r) / (1.0 - r)) * (x / 2.0).tan()).atan() / std::f64::consts::PI
}

/// Validated sampler for one `(sequence, params)` pair.
#[derive(Clone, Debug)]
pub struct WosSampler<T> {
    geometry: CantorGeometry<T>,
    params: WosParams<T>,
    eps2: T,
    outer2: T,
}

impl<T: Real> WosSampler<T> {
    pub fn new(seq: &ScaleSequence<T>, params: WosParams<T>) -> Result<Self> {
        params.validate(seq)?;
        Ok(Self {
            geometry: CantorGeometry::new(seq, params.depth),
            eps2: params.absorb_epsilon * params.absorb_epsilon,
            outer2: params.outer_radius * params.outer_radius,
            params,
        })
    }

    pub fn params(&self) -> &WosParams<T> {
        &self.params
    }

    pub fn geometry(&self) -> &CantorGeometry<T> {
        &self.geometry
    }

    /// Packed index of the absorbing generation-`depth` square, together with the number of jumps.
    pub fn sample_leaf<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(u64, u64)> {
        let c = set_center::<T>();
        let u = unit_vector::<T, R>(rng);
        let mut p = [
            c[0] + self.params.start_radius * u[0],
            c[1] + self.params.start_radius * u[1],
        ];
        let mut steps = 0u64;
        loop {
            let near = self.geometry.nearest(p);
            if near.distance2 < self.eps2 {
                return Ok((near.leaf, steps));
            }
            let r = near.distance2.sqrt();
            let u = unit_vector::<T, R>(rng);
            p = [p[0] + r * u[0], p[1] + r * u[1]];
            let (dx, dy) = (p[0] - c[0], p[1] - c[1]);
            if dx * dx + dy * dy > self.outer2 {
                p = exterior_reentry(p, self.params.reentry_radius, rng)?;
            }
            steps += 1;
            if steps >= self.params.max_steps {
                return Err(Error::StepLimitExceeded {
                    max_steps: self.params.max_steps,
                });
            }
        }
    }

    pub fn sample_exit<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<CylinderAddress> {
        let (leaf, _) = self.sample_leaf(rng)?;
        Ok(CylinderAddress::from_index(leaf, self.params.depth))
    }
}

/// One walker on stream `rng`.
pub fn sample_exit<T: Real>(
    seq: &ScaleSequence<T>,
    params: WosParams<T>,
    rng: RngStream,
) -> Result<CylinderAddress> {
    WosSampler::new(seq, params)?.sample_exit(&mut rng.generator())
}

#[derive(Clone, Debug, Default)]
struct Tally {
    counts: Vec<u64>,
    discarded: u64,
    steps: u64,
}

impl Tally {
    fn merge(mut self, other: Tally) -> Tally {
        if self.counts.is_empty() {
            return other;
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.discarded += other.discarded;
        self.steps += other.steps;
        self
    }
}

/// Runs `n_walkers` independent walkers, walker `i` on stream `(seed, i)`.
///
/// Counts are merged by integer addition, so the table is identical for any
/// `workers`.
pub fn run_campaign<T: Real>(
    seq: &ScaleSequence<T>,
    params: WosParams<T>,
    n_walkers: u64,
    seed: u64,
    workers: usize,
) -> Result<CylinderMeasureTable> {
    if n_walkers == 0 {
        return Err(Error::InvalidParams("n_walkers must be at least 1".into()));
    }
    let sampler = WosSampler::new(seq, params)?;
    let family = StreamFamily::new(seed);
    let cells = 1usize << (2 * params.depth);
    let batches = n_walkers.div_ceil(BATCH);

    let run_batch = |b: u64| -> Tally {
        let mut t = Tally {
            counts: vec![0; cells],
            ..Tally::default()
        };
        let end = ((b + 1) * BATCH).min(n_walkers);
        for i in b * BATCH..end {
            let mut rng = family.stream(i);
            match sampler.sample_leaf(&mut rng) {
                Ok((leaf, steps)) => {
                    t.counts[leaf as usize] += 1;
                    t.steps += steps;
                }
                Err(_) => t.discarded += 1,
            }
        }
        t
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()?;
    let tally = pool.install(|| {
        (0..batches)
            .into_par_iter()
            .map(run_batch)
            .reduce(Tally::default, Tally::merge)
    });

    if tally.discarded as f64 > MAX_DISCARDED_FRACTION * n_walkers as f64 {
        return Err(Error::TooManyDiscarded {
            discarded: tally.discarded,
            walkers: n_walkers,
        });
    }
    let prefix = seq.prefix_f64(params.depth);
    let params_json = params.to_json();
    let mut metadata = BTreeMap::new();
    metadata.insert(
        "mean_steps".to_string(),
        tally.steps as f64 / (n_walkers - tally.discarded).max(1) as f64,
    );
    let header = TableHeader {
        depth: params.depth,
        n_walkers,
        n_effective: 0,
        discarded: tally.discarded,
        seed: Some(seed),
        fingerprint: fingerprint(&prefix, &params_json),
        source: TableSource::WalkOnSpheres,
        oracle: false,
        sequence_prefix: prefix,
        params: params_json,
        metadata,
    };
    CylinderMeasureTable::from_leaf_counts(header, tally.counts)
}
