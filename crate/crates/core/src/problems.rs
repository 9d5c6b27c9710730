//! Experiment presets: a truth density, a kernel, an observation model and
//! solver defaults for each benchmark problem.

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{EvaluationGrid, GridAxis};
use crate::error::{check_dim, Error, Result};
use crate::kernels::{
    normal_pdf, GaussianConvolutionKernel, GaussianMixtureDelayKernel, Kernel, KernelModel,
    RadonAlignmentKernel,
};
use crate::points::PointSet;
use crate::reference::ReferenceMeasure;
use crate::rng::{stream, Role};
use crate::solver::{InitRule, ObservationSample, SolverConfig};

/// Mixture of diagonal Gaussians.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixture {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub sds: Vec<Vec<f64>>,
}

impl GaussianMixture {
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, sds: Vec<Vec<f64>>) -> Result<Self> {
        let mix = GaussianMixture { weights, means, sds };
        mix.validate()?;
        Ok(mix)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.weights.len();
        if n == 0 || self.means.len() != n || self.sds.len() != n {
            return Err(Error::input("mixture needs equally many weights, means and sds"));
        }
        let d = self.means[0].len();
        if d == 0 || self.means.iter().chain(&self.sds).any(|v| v.len() != d) {
            return Err(Error::input("mixture components must share one positive dimension"));
        }
        if self.sds.iter().flatten().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::input("mixture sds must be positive"));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0)) || (self.weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::input("mixture weights must be a probability vector"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        let mut total = 0.0;
        for ((w, m), s) in self.weights.iter().zip(&self.means).zip(&self.sds) {
            let mut p = *w;
            for ((xi, mi), si) in x.iter().zip(m).zip(s) {
                p *= normal_pdf(*xi, *mi, si * si);
            }
            total += p;
        }
        total
    }

    pub fn sample(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut comp = self.weights.len() - 1;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                comp = i;
                break;
            }
        }
        for ((o, m), s) in out.iter_mut().zip(&self.means[comp]).zip(&self.sds[comp]) {
            let z: f64 = rng.sample(StandardNormal);
            *o = m + s * z;
        }
    }

    /// Law of coordinate `c`.
    pub fn marginal(&self, c: usize) -> GaussianMixture {
        GaussianMixture {
            weights: self.weights.clone(),
            means: self.means.iter().map(|m| vec![m[c]]).collect(),
            sds: self.sds.iter().map(|s| vec![s[c]]).collect(),
        }
    }

    /// The mixture convolved with centred Gaussian noise of the given sds.
    pub fn convolved(&self, noise_sd: &[f64]) -> GaussianMixture {
        GaussianMixture {
            weights: self.weights.clone(),
            means: self.means.clone(),
            sds: self
                .sds
                .iter()
                .map(|s| s.iter().zip(noise_sd).map(|(a, b)| a.hypot(*b)).collect())
                .collect(),
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim()];
        for (w, mu) in self.weights.iter().zip(&self.means) {
            m.iter_mut().zip(mu).for_each(|(a, b)| *a += w * b);
        }
        m
    }
}

/// Slow-decay incidence curve on `[0, 100]` days:
/// `exp(-0.05 (8 - x)²)` up to day 8, `exp(-0.001 (x - 8)²)` after,
/// normalized to a probability density.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncidenceCurve;

impl IncidenceCurve {
    pub const PEAK: f64 = 8.0;
    pub const END: f64 = 100.0;
    const RISE: f64 = 0.05;
    const DECAY: f64 = 0.001;

    /// Unnormalized curve; equals 1 at the peak.
    pub fn shape(x: f64) -> f64 {
        if !(0.0..=Self::END).contains(&x) {
            0.0
        } else if x <= Self::PEAK {
            (-Self::RISE * (Self::PEAK - x).powi(2)).exp()
        } else {
            (-Self::DECAY * (x - Self::PEAK).powi(2)).exp()
        }
    }

    /// `∫₀¹⁰⁰ shape`.
    pub fn mass() -> f64 {
        let half = |rate: f64, len: f64| {
            0.5 * (std::f64::consts::PI / rate).sqrt() * libm::erf(len * rate.sqrt())
        };
        half(Self::RISE, Self::PEAK) + half(Self::DECAY, Self::END - Self::PEAK)
    }

    pub fn density(x: f64) -> f64 {
        Self::shape(x) / Self::mass()
    }

    /// Rejection sampling under the unit envelope on `[0, 100]`.
    pub fn sample(rng: &mut dyn RngCore) -> f64 {
        loop {
            let x = rng.random_range(0.0..Self::END);
            let u: f64 = rng.random();
            if u < Self::shape(x) {
                return x;
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Truth {
    GaussianMixture(GaussianMixture),
    Incidence,
}

impl Truth {
    pub fn dim(&self) -> usize {
        match self {
            Truth::GaussianMixture(m) => m.dim(),
            Truth::Incidence => 1,
        }
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        match self {
            Truth::GaussianMixture(m) => m.density(x),
            Truth::Incidence => IncidenceCurve::density(x[0]),
        }
    }

    pub fn sample(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        match self {
            Truth::GaussianMixture(m) => m.sample(rng, out),
            Truth::Incidence => out[0] = IncidenceCurve::sample(rng),
        }
    }
}

/// Reporting artefact: a random share of the cases falling on the sixth and
/// seventh day of each week is recorded two days late.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeekendDelay {
    pub fraction_lo: f64,
    pub fraction_hi: f64,
    pub delay_days: f64,
}

impl Default for WeekendDelay {
    fn default() -> Self {
        WeekendDelay {
            fraction_lo: 0.3,
            fraction_hi: 0.5,
            delay_days: 2.0,
        }
    }
}

impl WeekendDelay {
    /// Day `floor(y)` counted from 1; weeks are days 1–7, 8–14, ...
    pub fn affects(y: f64) -> bool {
        if !(y >= 1.0) {
            return false;
        }
        let day = y.floor() as u64;
        matches!(day % 7, 6 | 0)
    }

    fn week(y: f64) -> u64 {
        (y.floor() as u64 - 1) / 7
    }
}

/// How the reference measure is obtained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum ReferenceRule {
    Fixed { measure: ReferenceMeasure },
    /// Gaussian with the sample mean (moved by `shift`) and sample variance
    /// of the observations.
    FromObservations {
        #[serde(default)]
        shift: Option<Vec<f64>>,
    },
    Flat,
}

impl ReferenceRule {
    pub fn resolve(&self, dim: usize, observations: &ObservationSample) -> Result<ReferenceMeasure> {
        let r = match self {
            ReferenceRule::Fixed { measure } => measure.clone(),
            ReferenceRule::FromObservations { shift } => {
                check_dim("reference from observations", dim, observations.dim())?;
                ReferenceMeasure::from_sample(&observations.points, shift.as_deref())?
            }
            ReferenceRule::Flat => ReferenceMeasure::flat(dim),
        };
        check_dim("reference", dim, r.dim())?;
        r.validate()?;
        Ok(r)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPreset {
    pub name: String,
    pub kernel: Kernel,
    pub truth: Truth,
    #[serde(default)]
    pub misspecification: Option<WeekendDelay>,
    pub reference: ReferenceRule,
    pub init: InitRule,
    pub solver: SolverConfig,
    pub n_observations: usize,
    /// Grid for density metrics on the solution space.
    #[serde(default)]
    pub grid: Option<EvaluationGrid>,
    /// Grid for reconvolution on the observation space.
    #[serde(default)]
    pub observation_grid: Option<EvaluationGrid>,
}

fn axis(lo: f64, hi: f64, n: usize) -> GridAxis {
    GridAxis { lo, hi, n }
}

/// Names accepted by [`preset_by_name`].
pub const PRESET_NAMES: [&str; 6] = [
    "gaussian_mixture_1d",
    "toy_gaussian",
    "highdim_mixture",
    "epidemiology_synthetic",
    "epidemiology_misspecified",
    "ct_phantom",
];

/// Looks a preset up by name; `dim` applies to `highdim_mixture` only.
pub fn preset_by_name(name: &str, dim: Option<usize>) -> Result<ExperimentPreset> {
    match name {
        "gaussian_mixture_1d" => Ok(preset_gaussian_mixture_1d()),
        "toy_gaussian" => Ok(preset_toy_gaussian()),
        "highdim_mixture" => preset_highdim_mixture(dim.unwrap_or(2)),
        "epidemiology_synthetic" => Ok(preset_epidemiology_synthetic(false)),
        "epidemiology_misspecified" => Ok(preset_epidemiology_synthetic(true)),
        "ct_phantom" => Ok(preset_ct_phantom()),
        other => Err(Error::input(format!(
            "unknown preset {other:?}; expected one of {PRESET_NAMES:?}"
        ))),
    }
}

pub fn preset_gaussian_mixture_1d() -> ExperimentPreset {
    let truth = GaussianMixture {
        weights: vec![1.0 / 3.0, 2.0 / 3.0],
        means: vec![vec![0.3], vec![0.5]],
        sds: vec![vec![0.015], vec![0.043]],
    };
    ExperimentPreset {
        name: "gaussian_mixture_1d".into(),
        kernel: Kernel::GaussianConvolution(GaussianConvolutionKernel {
            noise_sd: vec![0.045],
        }),
        truth: Truth::GaussianMixture(truth),
        misspecification: None,
        reference: ReferenceRule::FromObservations { shift: None },
        init: InitRule::FromObservations { shift: None },
        solver: SolverConfig {
            alpha: 1e-3,
            gamma: 1e-3,
            n_particles: 1000,
            minibatch: 1000,
            max_steps: 100,
            ..SolverConfig::default()
        },
        n_observations: 1000,
        grid: Some(EvaluationGrid::new(vec![axis(-0.5, 1.5, 2001)]).expect("valid grid")),
        observation_grid: Some(EvaluationGrid::new(vec![axis(-0.5, 1.5, 2001)]).expect("valid grid")),
    }
}

pub fn preset_toy_gaussian() -> ExperimentPreset {
    ExperimentPreset {
        name: "toy_gaussian".into(),
        kernel: Kernel::GaussianConvolution(GaussianConvolutionKernel {
            noise_sd: vec![0.45],
        }),
        truth: Truth::GaussianMixture(GaussianMixture {
            weights: vec![1.0],
            means: vec![vec![0.0]],
            sds: vec![vec![0.43]],
        }),
        misspecification: None,
        reference: ReferenceRule::FromObservations { shift: None },
        init: InitRule::FromObservations { shift: None },
        solver: SolverConfig {
            alpha: 0.02,
            gamma: 1e-2,
            n_particles: 500,
            minibatch: 500,
            max_steps: 300,
            ..SolverConfig::default()
        },
        n_observations: 10_000,
        grid: Some(EvaluationGrid::new(vec![axis(-4.0, 4.0, 1601)]).expect("valid grid")),
        observation_grid: Some(EvaluationGrid::new(vec![axis(-5.0, 5.0, 2001)]).expect("valid grid")),
    }
}

/// `π = (1/3) N(0.3·1, 0.07² I) + (2/3) N(0.7·1, 0.1² I)` in dimension `d`.
pub fn preset_highdim_mixture(d: usize) -> Result<ExperimentPreset> {
    if d == 0 {
        return Err(Error::input("dimension must be at least 1"));
    }
    let truth = GaussianMixture {
        weights: vec![1.0 / 3.0, 2.0 / 3.0],
        means: vec![vec![0.3; d], vec![0.7; d]],
        sds: vec![vec![0.07; d], vec![0.1; d]],
    };
    let grid = (d <= 2).then(|| EvaluationGrid::new(vec![axis(0.0, 1.0, 201); d]).expect("valid grid"));
    let observation_grid =
        (d <= 2).then(|| EvaluationGrid::new(vec![axis(-0.5, 1.5, 201); d]).expect("valid grid"));
    Ok(ExperimentPreset {
        name: "highdim_mixture".into(),
        kernel: Kernel::GaussianConvolution(GaussianConvolutionKernel::isotropic(d, 0.15)?),
        truth: Truth::GaussianMixture(truth),
        misspecification: None,
        reference: ReferenceRule::Fixed {
            measure: ReferenceMeasure::isotropic(d, 0.5, 0.25 * 0.25)?,
        },
        init: InitRule::Reference,
        solver: SolverConfig {
            alpha: 1e-2,
            gamma: 1e-3,
            n_particles: 1000,
            minibatch: 1000,
            max_steps: 100,
            ..SolverConfig::default()
        },
        n_observations: 1000,
        grid,
        observation_grid,
    })
}

/// Incidence curve observed through the infection-to-death delay.
pub fn preset_epidemiology_synthetic(misspecified: bool) -> ExperimentPreset {
    let shift = Some(vec![-9.0]);
    ExperimentPreset {
        name: if misspecified {
            "epidemiology_misspecified"
        } else {
            "epidemiology_synthetic"
        }
        .into(),
        kernel: Kernel::GaussianMixtureDelay(GaussianMixtureDelayKernel::influenza_1918()),
        truth: Truth::Incidence,
        misspecification: misspecified.then(WeekendDelay::default),
        reference: ReferenceRule::FromObservations {
            shift: shift.clone(),
        },
        init: InitRule::FromObservations { shift },
        solver: SolverConfig {
            alpha: 1e-3,
            gamma: 0.1,
            n_particles: 500,
            minibatch: 500,
            max_steps: 3000,
            ..SolverConfig::default()
        },
        n_observations: 5000,
        grid: Some(EvaluationGrid::new(vec![axis(0.0, 100.0, 1001)]).expect("valid grid")),
        observation_grid: Some(EvaluationGrid::new(vec![axis(0.0, 150.0, 1501)]).expect("valid grid")),
    }
}

/// Two axis-aligned Gaussian blobs seen through noisy line projections.
pub fn preset_ct_phantom() -> ExperimentPreset {
    let truth = GaussianMixture {
        weights: vec![0.5, 0.5],
        means: vec![vec![-0.3, -0.2], vec![0.35, 0.25]],
        sds: vec![vec![0.15, 0.1], vec![0.1, 0.2]],
    };
    ExperimentPreset {
        name: "ct_phantom".into(),
        kernel: Kernel::RadonAlignment(RadonAlignmentKernel::new(0.05, 1.5).expect("valid kernel")),
        truth: Truth::GaussianMixture(truth),
        misspecification: None,
        reference: ReferenceRule::Fixed {
            measure: ReferenceMeasure::isotropic(2, 0.0, 0.25).expect("valid reference"),
        },
        init: InitRule::Reference,
        solver: SolverConfig {
            alpha: 1e-3,
            gamma: 1e-4,
            n_particles: 1000,
            minibatch: 1000,
            max_steps: 200,
            ..SolverConfig::default()
        },
        n_observations: 5000,
        grid: Some(EvaluationGrid::new(vec![axis(-1.0, 1.0, 101); 2]).expect("valid grid")),
        observation_grid: None,
    }
}

impl ExperimentPreset {
    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        if let Truth::GaussianMixture(m) = &self.truth {
            m.validate()?;
        }
        check_dim("truth vs kernel", self.kernel.dim_x(), self.truth.dim())?;
        if let Some(g) = &self.grid {
            check_dim("metric grid", self.truth.dim(), g.dim())?;
        }
        if let Some(g) = &self.observation_grid {
            check_dim("observation grid", self.kernel.dim_y(), g.dim())?;
        }
        if self.misspecification.is_some() && self.kernel.dim_y() != 1 {
            return Err(Error::input("weekend misspecification needs scalar observations"));
        }
        if self.n_observations == 0 {
            return Err(Error::input("n_observations must be at least 1"));
        }
        self.solver.validate()
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim_x()
    }

    /// Closed-form observation density, when the truth is a Gaussian mixture
    /// seen through Gaussian convolution.
    pub fn observation_mixture(&self) -> Option<GaussianMixture> {
        match (&self.truth, &self.kernel) {
            (Truth::GaussianMixture(m), Kernel::GaussianConvolution(k)) => Some(m.convolved(&k.noise_sd)),
            _ => None,
        }
    }

    /// `count` observations; observation `j` uses its own keyed stream, so a
    /// smaller sample is a prefix of a larger one with the same seed.
    pub fn sample_observations(&self, count: usize, seed: u64) -> Result<ObservationSample> {
        let (d, p) = (self.kernel.dim_x(), self.kernel.dim_y());
        let mut ys = PointSet::zeros(count, p);
        ys.as_mut_slice()
            .par_chunks_mut(p)
            .enumerate()
            .for_each_init(
                || vec![0.0; d],
                |x, (j, y)| {
                    let mut rng = stream(seed, Role::Observation, 0, j as u64);
                    self.truth.sample(&mut rng, x);
                    self.kernel.sample_y(x, &mut rng, y);
                    if let Some(w) = &self.misspecification {
                        if WeekendDelay::affects(y[0]) {
                            let week = WeekendDelay::week(y[0]);
                            let fraction = stream(seed, Role::Perturbation, week, 0)
                                .random_range(w.fraction_lo..=w.fraction_hi);
                            if rng.random::<f64>() < fraction {
                                y[0] += w.delay_days;
                            }
                        }
                    }
                },
            );
        ObservationSample::new(ys)
    }

    /// Truth density at every node of the metric grid.
    pub fn truth_on_grid(&self) -> Option<Vec<f64>> {
        let g = self.grid.as_ref()?;
        Some((0..g.len()).into_par_iter().map(|i| self.truth.density(&g.node(i))).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_name_resolves_and_validates() {
        for name in PRESET_NAMES {
            let p = preset_by_name(name, None).unwrap();
            p.validate().unwrap();
            assert_eq!(p.name, name);
        }
        assert!(preset_by_name("nope", None).is_err());
        assert!(preset_highdim_mixture(0).is_err());
    }

    #[test]
    fn mixture_observations_are_the_convolution() {
        let p = preset_gaussian_mixture_1d();
        let mu = p.observation_mixture().unwrap();
        let xs = EvaluationGrid::uniform(1, -1.0, 2.0, 30001).unwrap();
        for i in 0..20 {
            let y = 0.1 + 0.04 * i as f64;
            let vals: Vec<f64> = (0..xs.len())
                .map(|j| {
                    let x = xs.node(j);
                    p.kernel.density(&x, &[y]) * p.truth.density(&x)
                })
                .collect();
            let quad = xs.integrate(&vals).unwrap();
            assert!((quad - mu.density(&[y])).abs() < 1e-6, "y={y}");
        }
    }

    #[test]
    fn highdim_marginal_is_the_1d_mixture() {
        let p = preset_highdim_mixture(5).unwrap();
        let Truth::GaussianMixture(m) = &p.truth else { unreachable!() };
        let marg = m.marginal(3);
        let expected = GaussianMixture::new(
            vec![1.0 / 3.0, 2.0 / 3.0],
            vec![vec![0.3], vec![0.7]],
            vec![vec![0.07], vec![0.1]],
        )
        .unwrap();
        assert_eq!(marg, expected);
        assert!(p.grid.is_none());
        let p2 = preset_highdim_mixture(2).unwrap();
        let mass = p2.grid.as_ref().unwrap().integrate(&p2.truth_on_grid().unwrap()).unwrap();
        assert!((mass - 1.0).abs() < 1e-2);
    }

    #[test]
    fn truth_densities_integrate_to_one() {
        let p = preset_gaussian_mixture_1d();
        let g = EvaluationGrid::uniform(1, 0.3 - 8.0 * 0.043, 0.5 + 8.0 * 0.043, 40001).unwrap();
        let v: Vec<f64> = (0..g.len()).map(|i| p.truth.density(&g.node(i))).collect();
        assert!((g.integrate(&v).unwrap() - 1.0).abs() < 1e-9);

        let g = EvaluationGrid::uniform(1, 0.0, 100.0, 200_001).unwrap();
        let v: Vec<f64> = (0..g.len()).map(|i| IncidenceCurve::density(g.node(i)[0])).collect();
        assert!((g.integrate(&v).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn incidence_curve_is_continuous_at_peak() {
        assert_eq!(IncidenceCurve::shape(8.0), 1.0);
        assert!((IncidenceCurve::shape(8.0 + 1e-9) - 1.0).abs() < 1e-12);
        assert!((IncidenceCurve::shape(8.0 - 1e-9) - 1.0).abs() < 1e-12);
        assert_eq!(IncidenceCurve::shape(-1.0), 0.0);
        assert_eq!(IncidenceCurve::shape(101.0), 0.0);
    }

    #[test]
    fn mixture_sample_mean() {
        let p = preset_gaussian_mixture_1d();
        let n = 1_000_000;
        let obs = p.sample_observations(n, 5).unwrap();
        let (mean, var) = obs.points.moments();
        let want = 0.3 / 3.0 + 2.0 * 0.5 / 3.0;
        let se = (var[0] / n as f64).sqrt();
        assert!((mean[0] - want).abs() < 3.0 * se, "{} vs {want}", mean[0]);
    }

    #[test]
    fn delayed_observation_mean() {
        let p = preset_epidemiology_synthetic(false);
        let n = 200_000;
        let obs = p.sample_observations(n, 11).unwrap();
        let (mean, var) = obs.points.moments();
        let g = EvaluationGrid::uniform(1, 0.0, 100.0, 100_001).unwrap();
        let v: Vec<f64> = (0..g.len())
            .map(|i| {
                let x = g.node(i)[0];
                x * IncidenceCurve::density(x)
            })
            .collect();
        let truth_mean = g.integrate(&v).unwrap();
        let delay = 0.595 * 8.63 + 0.405 * 15.24;
        let se = (var[0] / n as f64).sqrt();
        assert!((mean[0] - truth_mean - delay).abs() < 4.0 * se);
    }

    #[test]
    fn misspecification_delays_weekend_cases_only() {
        let clean = preset_epidemiology_synthetic(false).sample_observations(20_000, 3).unwrap();
        let moved = preset_epidemiology_synthetic(true).sample_observations(20_000, 3).unwrap();
        let mut n_moved = 0;
        let mut n_weekend = 0;
        for (a, b) in clean.points.rows().zip(moved.points.rows()) {
            if WeekendDelay::affects(a[0]) {
                n_weekend += 1;
                if a[0] != b[0] {
                    assert_eq!(b[0], a[0] + 2.0);
                    n_moved += 1;
                }
            } else {
                assert_eq!(a, b);
            }
        }
        let share = n_moved as f64 / n_weekend as f64;
        assert!((0.3..=0.5).contains(&share), "{share}");
    }

    #[test]
    fn weekend_days() {
        assert!(WeekendDelay::affects(6.5));
        assert!(WeekendDelay::affects(7.2));
        assert!(WeekendDelay::affects(13.0));
        assert!(!WeekendDelay::affects(8.0));
        assert!(!WeekendDelay::affects(0.5));
        assert!(!WeekendDelay::affects(-6.5));
    }

    #[test]
    fn observations_nest_by_prefix_and_are_deterministic() {
        let p = preset_toy_gaussian();
        let small = p.sample_observations(100, 9).unwrap();
        let big = p.sample_observations(1000, 9).unwrap();
        assert_eq!(small.points.as_slice(), &big.points.as_slice()[..100]);
        assert_eq!(big, p.sample_observations(1000, 9).unwrap());
    }

    #[test]
    fn ct_observations_live_on_the_window() {
        let p = preset_ct_phantom();
        let obs = p.sample_observations(2000, 1).unwrap();
        assert_eq!(obs.dim(), 2);
        for y in obs.points.rows() {
            assert!((0.0..std::f64::consts::TAU).contains(&y[0]));
        }
    }
}
