//! Monte Carlo simulation of the model killed at an independent exponential
//! time. Used as an oracle that shares no formulas with the analytic modules.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{ErlangComponent, Jumps, LevyModel};

/// Default number of occupation grid steps per unit of killing time.
pub const DEFAULT_GRID_STEPS: usize = 10_000;

const BLOCK: usize = 4096;
const INVERSION_TOL: f64 = 1e-12;

/// Functionals recorded along one killed path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathFunctionals {
    pub x_end: f64,
    pub sup: f64,
    pub inf: f64,
    /// Time spent strictly above each tracked level.
    pub occupation_above: Vec<f64>,
    /// First time strictly above each tracked level and the overshoot there.
    pub first_passage: Vec<Option<(f64, f64)>>,
    pub killed_at: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_paths: usize,
    pub seed: u64,
    /// Occupation grid: substep `h = theta / grid_steps` on diffusive segments.
    pub grid_steps: usize,
    /// Worker cap; `None` uses the ambient rayon pool.
    pub threads: Option<usize>,
}

impl SimConfig {
    pub fn new(n_paths: usize, seed: u64) -> Self {
        SimConfig {
            n_paths,
            seed,
            grid_steps: DEFAULT_GRID_STEPS,
            threads: None,
        }
    }

    pub fn with_grid_steps(mut self, grid_steps: usize) -> Self {
        self.grid_steps = grid_steps;
        self
    }

    pub fn with_threads(mut self, threads: Option<usize>) -> Self {
        self.threads = threads;
        self
    }
}

/// A path functional whose expectation is estimated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Functional {
    /// `P{inf < x}`.
    InfBelow(f64),
    /// `P{inf = 0}`.
    InfAtZero,
    /// `P{sup > x}`.
    SupAbove(f64),
    /// `P{sup = 0}`.
    SupAtZero,
    /// `E exp(-u * time above level)`.
    OccupationMgf { level: f64, u: f64 },
    /// `P{tau_level < theta, overshoot in (lo, hi]}`.
    OvershootBin { level: f64, lo: f64, hi: f64 },
    /// `P{tau_level < theta, overshoot = 0}`.
    OvershootAtom { level: f64 },
    /// `E exp(-s tau_level)`, i.e. `P{tau_level < theta}`.
    PassageMgf { level: f64 },
}

impl Functional {
    fn level(&self) -> Option<f64> {
        match *self {
            Functional::OccupationMgf { level, .. }
            | Functional::OvershootBin { level, .. }
            | Functional::OvershootAtom { level }
            | Functional::PassageMgf { level } => Some(level),
            _ => None,
        }
    }

    fn needs_occupation(&self) -> bool {
        matches!(self, Functional::OccupationMgf { .. })
    }

    fn evaluate(&self, path: &PathFunctionals, levels: &[f64]) -> f64 {
        let idx = |l: f64| levels.iter().position(|&v| v == l).expect("level is tracked");
        let ind = |b: bool| if b { 1.0 } else { 0.0 };
        match *self {
            Functional::InfBelow(x) => ind(path.inf < x),
            Functional::InfAtZero => ind(path.inf == 0.0),
            Functional::SupAbove(x) => ind(path.sup > x),
            Functional::SupAtZero => ind(path.sup == 0.0),
            Functional::OccupationMgf { level, u } => (-u * path.occupation_above[idx(level)]).exp(),
            Functional::OvershootBin { level, lo, hi } => match path.first_passage[idx(level)] {
                Some((_, o)) => ind(o > lo && o <= hi),
                None => 0.0,
            },
            Functional::OvershootAtom { level } => match path.first_passage[idx(level)] {
                Some((_, o)) => ind(o == 0.0),
                None => 0.0,
            },
            Functional::PassageMgf { level } => ind(path.first_passage[idx(level)].is_some()),
        }
    }
}

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

enum JumpSampler {
    None,
    Mixture { cumulative: Vec<f64>, comps: Vec<ErlangComponent> },
    Inverse { survival: Box<dyn Fn(f64) -> f64 + Send + Sync>, scale: f64 },
}

impl JumpSampler {
    fn new(jumps: &Jumps) -> Self {
        match jumps {
            Jumps::None => JumpSampler::None,
            Jumps::Me(spec) => match spec.erlang_mixture() {
                Some(comps) if comps.iter().all(|c| c.weight >= 0.0) => {
                    let total: f64 = comps.iter().map(|c| c.weight).sum();
                    let mut acc = 0.0;
                    let cumulative = comps
                        .iter()
                        .map(|c| {
                            acc += c.weight / total;
                            acc
                        })
                        .collect();
                    JumpSampler::Mixture {
                        cumulative,
                        comps: comps.to_vec(),
                    }
                }
                _ => {
                    let spec = spec.clone();
                    let scale = spec.mean_magnitude();
                    JumpSampler::Inverse {
                        survival: Box::new(move |u| spec.unit_tail(u)),
                        scale,
                    }
                }
            },
            Jumps::General(g) => {
                let g = g.clone();
                let scale = g.mean_magnitude();
                let sign = g.side().sign();
                let lambda = g.intensity();
                JumpSampler::Inverse {
                    survival: Box::new(move |u| (g.tail(sign * u) / lambda).clamp(0.0, 1.0)),
                    scale,
                }
            }
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        match self {
            JumpSampler::None => Err(Error::Precondition("no jumps on this side".into())),
            JumpSampler::Mixture { cumulative, comps } => {
                let v: f64 = rng.random();
                let k = cumulative.iter().position(|&c| v < c).unwrap_or(comps.len() - 1);
                let c = &comps[k];
                let e: f64 = (0..c.shape).map(|_| rng.sample::<f64, _>(Exp1)).sum();
                Ok(e / c.rate)
            }
            JumpSampler::Inverse { survival, scale } => {
                let v: f64 = rng.random();
                invert_survival(survival.as_ref(), 1.0 - v, *scale)
            }
        }
    }
}

/// Solves `survival(u) = target` by bracketing and bisection.
fn invert_survival(survival: &dyn Fn(f64) -> f64, target: f64, scale: f64) -> Result<f64> {
    if target >= 1.0 {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut s_lo = 1.0;
    let mut hi = if scale.is_finite() && scale > 0.0 { scale } else { 1.0 };
    let mut s_hi = survival(hi);
    while s_hi > target {
        if s_hi > s_lo + 1e-12 {
            return Err(Error::Numerical(format!("jump CDF is not monotone near {hi}")));
        }
        lo = hi;
        s_lo = s_hi;
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::Numerical("jump quantile bracketing diverged".into()));
        }
        s_hi = survival(hi);
    }
    while hi - lo > INVERSION_TOL * (1.0 + hi) {
        let mid = 0.5 * (lo + hi);
        let s_mid = survival(mid);
        if s_mid > s_lo + 1e-12 || s_mid < s_hi - 1e-12 {
            return Err(Error::Numerical(format!("jump CDF is not monotone near {mid}")));
        }
        if s_mid > target {
            lo = mid;
            s_lo = s_mid;
        } else {
            hi = mid;
            s_hi = s_mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Draws one jump magnitude from the unit law of `jumps`.
pub fn sample_jump<R: Rng + ?Sized>(jumps: &Jumps, rng: &mut R) -> Result<f64> {
    JumpSampler::new(jumps).sample(rng)
}

/// Path simulator with precomputed jump samplers.
pub struct Simulator {
    drift: f64,
    sigma: f64,
    s: f64,
    lambda_neg: f64,
    lambda_pos: f64,
    neg: JumpSampler,
    pos: JumpSampler,
    levels: Vec<f64>,
    track_occupation: bool,
    grid_steps: usize,
}

struct PathState<'a> {
    t: f64,
    x: f64,
    sup: f64,
    inf: f64,
    occ: Vec<f64>,
    passage: Vec<Option<(f64, f64)>>,
    levels: &'a [f64],
}

impl PathState<'_> {
    fn record_passage(&mut self, x: f64, t: f64) {
        for (k, &l) in self.levels.iter().enumerate() {
            if self.passage[k].is_none() && x > l {
                self.passage[k] = Some((t, x - l));
            }
        }
    }
}

// Gauss-Legendre nodes and weights on [0, 1].
const GL_NODES: [f64; 8] = [
    0.019855071751231856,
    0.10166676129318664,
    0.2372337950418355,
    0.4082826787521751,
    0.5917173212478249,
    0.7627662049581645,
    0.8983332387068134,
    0.9801449282487681,
];
const GL_WEIGHTS: [f64; 8] = [
    0.05061426814518813,
    0.11119051722668724,
    0.15685332293894363,
    0.18134189168918100,
    0.18134189168918100,
    0.15685332293894363,
    0.11119051722668724,
    0.05061426814518813,
];

fn normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

/// Expected time above `level` of a Brownian bridge from `x0` to `x1` over `dt`.
fn bridge_occupation(x0: f64, x1: f64, dt: f64, sigma: f64, level: f64) -> f64 {
    let spread = 4.0 * sigma * dt.sqrt();
    if x0.min(x1) - level > spread {
        return dt;
    }
    if level - x0.max(x1) > spread {
        return 0.0;
    }
    let mut acc = 0.0;
    for (w, v) in GL_WEIGHTS.iter().zip(GL_NODES) {
        let mean = x0 + (x1 - x0) * v;
        let sd = sigma * (dt * v * (1.0 - v)).sqrt();
        acc += w * normal_sf((level - mean) / sd);
    }
    acc * dt
}

impl Simulator {
    /// `levels` are tracked for first passage and, when `track_occupation`,
    /// occupation time.
    pub fn new(model: &LevyModel, s: f64, levels: &[f64], track_occupation: bool, grid_steps: usize) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::Precondition(format!("simulation needs a killing rate s > 0 (got {s})")));
        }
        if grid_steps == 0 {
            return Err(Error::Precondition("grid_steps must be positive".into()));
        }
        Ok(Simulator {
            drift: model.drift(),
            sigma: model.sigma(),
            s,
            lambda_neg: model.neg_jumps().intensity(),
            lambda_pos: model.pos_jumps().intensity(),
            neg: JumpSampler::new(model.neg_jumps()),
            pos: JumpSampler::new(model.pos_jumps()),
            levels: levels.to_vec(),
            track_occupation,
            grid_steps,
        })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Simulates one path on `[0, theta]` with `theta ~ Exp(s)` drawn first.
    pub fn path<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<PathFunctionals> {
        let theta = rng.sample::<f64, _>(Exp1) / self.s;
        let h = theta / self.grid_steps as f64;
        let lambda = self.lambda_neg + self.lambda_pos;
        let mut st = PathState {
            t: 0.0,
            x: 0.0,
            sup: 0.0,
            inf: 0.0,
            occ: vec![0.0; self.levels.len()],
            passage: vec![None; self.levels.len()],
            levels: &self.levels,
        };
        st.record_passage(0.0, 0.0);
        loop {
            let gap = if lambda > 0.0 {
                rng.sample::<f64, _>(Exp1) / lambda
            } else {
                f64::INFINITY
            };
            let end = (st.t + gap).min(theta);
            let dt = end - st.t;
            self.segment(&mut st, dt, h, rng);
            st.t = end;
            if end >= theta {
                break;
            }
            let up = rng.random::<f64>() * lambda < self.lambda_pos;
            let (sampler, sign) = if up { (&self.pos, 1.0) } else { (&self.neg, -1.0) };
            st.x += sign * sampler.sample(rng)?;
            st.sup = st.sup.max(st.x);
            st.inf = st.inf.min(st.x);
            let (x, t) = (st.x, st.t);
            st.record_passage(x, t);
        }
        Ok(PathFunctionals {
            x_end: st.x,
            sup: st.sup,
            inf: st.inf,
            occupation_above: st.occ,
            first_passage: st.passage,
            killed_at: theta,
        })
    }

    fn segment<R: Rng + ?Sized>(&self, st: &mut PathState, dt: f64, h: f64, rng: &mut R) {
        if dt <= 0.0 {
            return;
        }
        if self.sigma == 0.0 {
            self.linear_segment(st, dt);
        } else {
            let n = if self.track_occupation {
                (dt / h).ceil().max(1.0) as usize
            } else {
                1
            };
            let step = dt / n as f64;
            for k in 0..n {
                self.brownian_step(st, st.t + k as f64 * step, step, rng);
            }
        }
    }

    fn linear_segment(&self, st: &mut PathState, dt: f64) {
        let a = self.drift;
        let x0 = st.x;
        let x1 = x0 + a * dt;
        st.sup = st.sup.max(x1);
        st.inf = st.inf.min(x1);
        for (k, &l) in self.levels.iter().enumerate() {
            let above = if a == 0.0 {
                if x0 > l {
                    dt
                } else {
                    0.0
                }
            } else {
                let cross = (l - x0) / a;
                if a > 0.0 {
                    dt - cross.clamp(0.0, dt)
                } else {
                    cross.clamp(0.0, dt)
                }
            };
            st.occ[k] += above;
            if st.passage[k].is_none() && a > 0.0 && x1 > l {
                st.passage[k] = Some((st.t + (l - x0) / a, 0.0));
            }
        }
        st.x = x1;
    }

    fn brownian_step<R: Rng + ?Sized>(&self, st: &mut PathState, t0: f64, dt: f64, rng: &mut R) {
        let var = self.sigma * self.sigma * dt;
        let z = self.drift * dt + var.sqrt() * rng.sample::<f64, _>(StandardNormal);
        let u1 = 1.0 - rng.random::<f64>();
        let u2 = 1.0 - rng.random::<f64>();
        let x0 = st.x;
        let x1 = x0 + z;
        let hi = x0 + 0.5 * (z + (z * z - 2.0 * var * u1.ln()).sqrt());
        let lo = x0 + 0.5 * (z - (z * z - 2.0 * var * u2.ln()).sqrt());
        st.sup = st.sup.max(hi);
        st.inf = st.inf.min(lo);
        for (k, &l) in self.levels.iter().enumerate() {
            if self.track_occupation {
                st.occ[k] += bridge_occupation(x0, x1, dt, self.sigma, l);
            }
            if st.passage[k].is_none() && hi > l {
                let frac = ((l - x0) / (hi - x0)).clamp(0.0, 1.0);
                st.passage[k] = Some((t0 + frac * dt, 0.0));
            }
        }
        st.x = x1;
    }
}

/// Simulates one killed path tracking first passage and occupation at `levels`.
pub fn simulate_killed_path<R: Rng + ?Sized>(
    model: &LevyModel,
    s: f64,
    levels: &[f64],
    rng: &mut R,
) -> Result<PathFunctionals> {
    Simulator::new(model, s, levels, true, DEFAULT_GRID_STEPS)?.path(rng)
}

/// RNG for path `index` of a run seeded with `seed`.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, Copy)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = crate::numeric::pairwise_sum(values) / n;
        let dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
        Moments {
            n,
            mean,
            m2: crate::numeric::pairwise_sum(&dev),
        }
    }

    fn merge(a: Moments, b: Moments) -> Moments {
        let n = a.n + b.n;
        let delta = b.mean - a.mean;
        Moments {
            n,
            mean: a.mean + delta * b.n / n,
            m2: a.m2 + b.m2 + delta * delta * a.n * b.n / n,
        }
    }
}

fn merge_tree(blocks: &[Moments]) -> Moments {
    if blocks.len() == 1 {
        return blocks[0];
    }
    let mid = blocks.len() / 2;
    Moments::merge(merge_tree(&blocks[..mid]), merge_tree(&blocks[mid..]))
}

/// Estimates the expectations of `functionals` from one batch of paths.
pub fn estimate_many(model: &LevyModel, s: f64, functionals: &[Functional], config: &SimConfig) -> Result<Vec<Estimate>> {
    if config.n_paths == 0 {
        return Err(Error::Precondition("n_paths must be at least 1".into()));
    }
    if functionals.is_empty() {
        return Ok(Vec::new());
    }
    let mut levels: Vec<f64> = Vec::new();
    for f in functionals {
        if let Some(l) = f.level() {
            if !levels.contains(&l) {
                levels.push(l);
            }
        }
    }
    let track = functionals.iter().any(Functional::needs_occupation);
    let sim = Simulator::new(model, s, &levels, track, config.grid_steps)?;
    let n = config.n_paths;
    let blocks = n.div_ceil(BLOCK);
    let run = || -> Result<Vec<Vec<Moments>>> {
        (0..blocks)
            .into_par_iter()
            .map(|b| {
                let start = b * BLOCK;
                let end = (start + BLOCK).min(n);
                let mut cols = vec![Vec::with_capacity(end - start); functionals.len()];
                for i in start..end {
                    let mut rng = path_rng(config.seed, i as u64);
                    let path = sim.path(&mut rng)?;
                    for (col, f) in cols.iter_mut().zip(functionals) {
                        col.push(f.evaluate(&path, sim.levels()));
                    }
                }
                Ok(cols.iter().map(|c| Moments::of(c)).collect())
            })
            .collect()
    };
    let per_block = match config.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    Ok((0..functionals.len())
        .map(|k| {
            let col: Vec<Moments> = per_block.iter().map(|b| b[k]).collect();
            let m = merge_tree(&col);
            let var = if n > 1 { m.m2 / (m.n - 1.0) } else { 0.0 };
            Estimate {
                mean: m.mean,
                std_error: (var / m.n).sqrt(),
                n,
            }
        })
        .collect())
}

/// Estimates the expectation of a single functional.
pub fn estimate(model: &LevyModel, s: f64, functional: Functional, config: &SimConfig) -> Result<Estimate> {
    Ok(estimate_many(model, s, &[functional], config)?[0])
}
