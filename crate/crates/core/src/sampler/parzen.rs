//! Per-parameter Parzen density estimators for TPE.

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use crate::space::{Domain, HpConfig, ParamSpec, Scale, Value};

use super::TpeSettings;

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const REJECTION_TRIES: usize = 256;

/// Density over one parameter, fitted to a set of observed values.
///
/// Numeric densities live in the parameter's scale space (log space for
/// log-scaled ranges, half-unit padded for integers) and integrate to one
/// over it.
#[derive(Debug, Clone, PartialEq)]
pub enum DensityModel {
    Kernel(KernelDensity),
    Categorical(CategoricalDensity),
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelDensity {
    lo: f64,
    hi: f64,
    scale: Scale,
    integer: bool,
    centers: Vec<f64>,
    bandwidth: f64,
    /// Mass of each untruncated kernel inside `[lo, hi]`.
    mass: Vec<f64>,
}

/// Probability per choice. For grid parameters `points` maps indices back to values.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalDensity {
    probs: Vec<f64>,
    points: Option<Vec<f64>>,
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / SQRT_2))
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.map(|x| (x - max).exp()).sum::<f64>().ln()
}

impl KernelDensity {
    fn fit(lo: f64, hi: f64, scale: Scale, integer: bool, centers: Vec<f64>, floor: f64) -> Self {
        let range = hi - lo;
        let bandwidth = if centers.is_empty() {
            range
        } else {
            range * floor.max(1.0 / centers.len() as f64)
        };
        let mass = centers
            .iter()
            .map(|&c| {
                let m = std_normal_cdf((hi - c) / bandwidth) - std_normal_cdf((lo - c) / bandwidth);
                m.max(f64::MIN_POSITIVE)
            })
            .collect();
        Self {
            lo,
            hi,
            scale,
            integer,
            centers,
            bandwidth,
            mass,
        }
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    fn to_internal(&self, v: f64) -> f64 {
        match self.scale {
            Scale::Linear => v,
            Scale::Log => v.ln(),
        }
    }

    fn to_external(&self, x: f64) -> f64 {
        match self.scale {
            Scale::Linear => x,
            Scale::Log => x.exp(),
        }
    }

    /// Log density at a point of the scale space.
    pub fn log_density_internal(&self, x: f64) -> f64 {
        if !(self.lo..=self.hi).contains(&x) {
            return f64::NEG_INFINITY;
        }
        if self.centers.is_empty() {
            return -(self.hi - self.lo).ln();
        }
        let h = self.bandwidth;
        let terms = self.centers.iter().zip(&self.mass).map(move |(&c, &m)| {
            let u = (x - c) / h;
            -0.5 * u * u - LN_SQRT_2PI - h.ln() - m.ln()
        });
        log_sum_exp(terms) - (self.centers.len() as f64).ln()
    }

    fn sample_internal<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.centers.is_empty() {
            let u: f64 = rng.random();
            return self.lo + u * (self.hi - self.lo);
        }
        let c = self.centers[rng.random_range(0..self.centers.len())];
        for _ in 0..REJECTION_TRIES {
            let z: f64 = rng.sample(StandardNormal);
            let x = c + self.bandwidth * z;
            if (self.lo..=self.hi).contains(&x) {
                return x;
            }
        }
        c.clamp(self.lo, self.hi)
    }
}

impl CategoricalDensity {
    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    fn index_of(&self, value: Value) -> Option<usize> {
        match (&self.points, value) {
            (None, Value::Cat(i)) if i < self.probs.len() => Some(i),
            (Some(points), Value::Real(v)) => points.iter().position(|p| p.to_bits() == v.to_bits()),
            _ => None,
        }
    }
}

impl DensityModel {
    pub fn log_density(&self, value: Value) -> f64 {
        match self {
            DensityModel::Kernel(k) => {
                let v = match value {
                    Value::Real(v) => v,
                    Value::Int(v) => v as f64,
                    Value::Cat(_) => return f64::NEG_INFINITY,
                };
                if k.scale == Scale::Log && v <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                k.log_density_internal(k.to_internal(v))
            }
            DensityModel::Categorical(c) => c
                .index_of(value)
                .map_or(f64::NEG_INFINITY, |i| c.probs[i].ln()),
        }
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> Value {
        match self {
            DensityModel::Kernel(k) => {
                let v = k.to_external(k.sample_internal(rng));
                if k.integer {
                    let lo = k.to_external(k.lo) + 0.5;
                    let hi = k.to_external(k.hi) - 0.5;
                    Value::Int(v.round().clamp(lo.round(), hi.round()) as i64)
                } else {
                    Value::Real(v.clamp(k.to_external(k.lo), k.to_external(k.hi)))
                }
            }
            DensityModel::Categorical(c) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut pick = c.probs.len() - 1;
                for (i, p) in c.probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        pick = i;
                        break;
                    }
                }
                match &c.points {
                    Some(points) => Value::Real(points[pick]),
                    None => Value::Cat(pick),
                }
            }
        }
    }
}

/// Fits the density of `param` over the values it takes in `configs`.
///
/// Ranges get a mixture of truncated Gaussian kernels, one per observation,
/// with bandwidth `range * max(bandwidth_floor, 1 / count)` in scale space.
/// Finite domains get observed frequencies smoothed by `categorical_prior`.
/// With no observations both reduce to the uniform law.
pub fn parzen_fit(configs: &[&HpConfig], param: &ParamSpec, settings: &TpeSettings) -> DensityModel {
    let observed = configs.iter().filter_map(|c| c.get(&param.name));
    match &param.domain {
        Domain::Continuous { lo, hi } => {
            let (lo, hi) = match param.scale {
                Scale::Linear => (*lo, *hi),
                Scale::Log => (lo.ln(), hi.ln()),
            };
            let centers = observed
                .filter_map(|v| match v {
                    Value::Real(x) => Some(match param.scale {
                        Scale::Linear => x,
                        Scale::Log => x.ln(),
                    }),
                    _ => None,
                })
                .collect();
            DensityModel::Kernel(KernelDensity::fit(
                lo,
                hi,
                param.scale,
                false,
                centers,
                settings.bandwidth_floor,
            ))
        }
        Domain::Integer { lo, hi } => {
            let (lo, hi) = (*lo as f64 - 0.5, *hi as f64 + 0.5);
            let tx = |v: f64| match param.scale {
                Scale::Linear => v,
                Scale::Log => v.ln(),
            };
            let centers = observed
                .filter_map(|v| match v {
                    Value::Int(x) => Some(tx(x as f64)),
                    _ => None,
                })
                .collect();
            DensityModel::Kernel(KernelDensity::fit(
                tx(lo),
                tx(hi),
                param.scale,
                true,
                centers,
                settings.bandwidth_floor,
            ))
        }
        Domain::Categorical { choices } => {
            let mut counts = vec![0.0; choices.len()];
            for v in observed {
                if let Value::Cat(i) = v {
                    if let Some(c) = counts.get_mut(i) {
                        *c += 1.0;
                    }
                }
            }
            DensityModel::Categorical(smoothed(counts, settings.categorical_prior, None))
        }
        Domain::Grid { points } => {
            let mut counts = vec![0.0; points.len()];
            for v in observed {
                if let Value::Real(x) = v {
                    if let Some(i) = points.iter().position(|p| p.to_bits() == x.to_bits()) {
                        counts[i] += 1.0;
                    }
                }
            }
            DensityModel::Categorical(smoothed(
                counts,
                settings.categorical_prior,
                Some(points.clone()),
            ))
        }
    }
}

fn smoothed(counts: Vec<f64>, prior: f64, points: Option<Vec<f64>>) -> CategoricalDensity {
    let total: f64 = counts.iter().sum::<f64>() + prior * counts.len() as f64;
    CategoricalDensity {
        probs: counts.into_iter().map(|c| (c + prior) / total).collect(),
        points,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn settings() -> TpeSettings {
        TpeSettings::default()
    }

    /// Composite Simpson over `[a, b]`.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let x = a + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    #[test]
    fn categorical_prior_smoothing() {
        let p = ParamSpec::categorical("c", ["A", "B"]);
        let cfg = HpConfig::new().with("c", Value::Cat(0));
        let model = parzen_fit(&[&cfg], &p, &settings());
        assert!((model.log_density(Value::Cat(0)).exp() - 2.0 / 3.0).abs() < 1e-12);
        assert!((model.log_density(Value::Cat(1)).exp() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn single_kernel_is_symmetric_and_peaked() {
        let p = ParamSpec::continuous("x", 0.0, 1.0);
        let cfg = HpConfig::new().with("x", Value::Real(0.5));
        let model = parzen_fit(&[&cfg], &p, &settings());
        let at = |x| model.log_density(Value::Real(x));
        assert!((at(0.3) - at(0.7)).abs() < 1e-12);
        assert!(at(0.5) > at(0.9));
        assert_eq!(at(1.5), f64::NEG_INFINITY);
    }

    #[test]
    fn kernel_mixture_integrates_to_one() {
        let p = ParamSpec::continuous("x", -2.0, 3.0);
        let cfgs: Vec<HpConfig> = [-1.9, 0.0, 0.1, 2.95]
            .iter()
            .map(|&v| HpConfig::new().with("x", Value::Real(v)))
            .collect();
        let refs: Vec<&HpConfig> = cfgs.iter().collect();
        let tight = TpeSettings {
            bandwidth_floor: 0.05,
            ..settings()
        };
        for s in [settings(), tight] {
            let model = parzen_fit(&refs, &p, &s);
            let integral = simpson(|x| model.log_density(Value::Real(x)).exp(), -2.0, 3.0, 20_000);
            assert!((integral - 1.0).abs() < 1e-6, "integral {integral}");
        }
    }

    #[test]
    fn log_scale_density_integrates_in_log_space() {
        let p = ParamSpec::continuous("x", 1e-3, 10.0).log();
        let cfgs: Vec<HpConfig> = [0.002, 0.5, 9.0]
            .iter()
            .map(|&v| HpConfig::new().with("x", Value::Real(v)))
            .collect();
        let refs: Vec<&HpConfig> = cfgs.iter().collect();
        let DensityModel::Kernel(k) = parzen_fit(&refs, &p, &settings()) else {
            panic!("expected kernel density");
        };
        let (lo, hi) = k.bounds();
        let integral = simpson(|x| k.log_density_internal(x).exp(), lo, hi, 20_000);
        assert!((integral - 1.0).abs() < 1e-6);
    }

    #[test]
    fn empty_fit_is_uniform() {
        let p = ParamSpec::continuous("x", 0.0, 4.0);
        let model = parzen_fit(&[], &p, &settings());
        assert!((model.log_density(Value::Real(1.0)) - (0.25f64).ln()).abs() < 1e-12);
        let c = ParamSpec::categorical("c", ["a", "b", "c", "d"]);
        let model = parzen_fit(&[], &c, &settings());
        assert!((model.log_density(Value::Cat(3)).exp() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn samples_stay_in_domain() {
        let params = [
            ParamSpec::continuous("x", 0.0, 1.0),
            ParamSpec::integer("n", 1, 64).log(),
            ParamSpec::grid("g", [0.1, 0.2]),
            ParamSpec::categorical("c", ["a", "b"]),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = HpConfig::new()
            .with("x", Value::Real(0.999))
            .with("n", Value::Int(64))
            .with("g", Value::Real(0.2))
            .with("c", Value::Cat(1));
        for p in &params {
            let model = parzen_fit(&[&cfg], p, &settings());
            for _ in 0..500 {
                let v = model.sample(&mut rng);
                assert!(p.contains(v), "{v:?} outside {p:?}");
                assert!(model.log_density(v).is_finite());
            }
        }
    }

    #[test]
    fn bandwidth_follows_count_rule() {
        let p = ParamSpec::continuous("x", 0.0, 2.0);
        let cfgs: Vec<HpConfig> = (0..4)
            .map(|i| HpConfig::new().with("x", Value::Real(i as f64 * 0.5)))
            .collect();
        let refs: Vec<&HpConfig> = cfgs.iter().collect();
        let DensityModel::Kernel(k) = parzen_fit(&refs, &p, &settings()) else {
            panic!()
        };
        assert!((k.bandwidth() - 0.5).abs() < 1e-15);
    }
}
