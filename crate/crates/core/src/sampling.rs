//! Surrogate sampling at arbitrary interpolation times and checkpoint I/O.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufWriter;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Condition, ObservationSet, Record, TimeMap};
use crate::density::{ConditionBandwidth, NwEstimator, Potential};
use crate::diff::{read_container, write_container, FilmMlp, MlpSpec, ParamVector};
use crate::error::{Error, Result};
use crate::geometry::{EigenMode, Lagrangian, MetricField};
use crate::training::TrainingConfig;
use crate::transport::{BundleSpec, TransportBundle};

/// A trained bundle with the anchor data it samples from.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateModel {
    pub bundle: TransportBundle,
    pub anchors: ObservationSet,
    pub config: TrainingConfig,
    /// Free-form provenance (dataset fingerprint, code version, ...).
    pub provenance: BTreeMap<String, String>,
}

/// One emitted sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub y: Vec<f64>,
    pub x: Condition,
    pub t: f64,
    pub lambda: f64,
    pub seed: u64,
    pub draw: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct MetricMeta {
    net: MlpSpec,
    budget: f64,
    eigen: EigenMode,
}

#[derive(Debug, Serialize, Deserialize)]
struct PotentialMeta {
    alpha: f64,
    eps: f64,
    h_y: f64,
    h_x: ConditionBandwidth,
}

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    bundle: BundleSpec,
    config: TrainingConfig,
    metric: Option<MetricMeta>,
    potential: Option<PotentialMeta>,
    time_map: TimeMap,
    anchors: Vec<Record>,
    provenance: BTreeMap<String, String>,
}

/// Interval index and local parameter for `t`; the right end of the grid
/// maps to the last interval at `s = 1`.
pub fn locate(anchor_times: &[f64], t: f64) -> Result<(usize, f64)> {
    let (lo, hi) = (anchor_times[0], *anchor_times.last().unwrap());
    if !(t >= lo && t <= hi) {
        return Err(Error::Extrapolation { value: t, min: lo, max: hi });
    }
    let last = anchor_times.len() - 2;
    let k = anchor_times.partition_point(|&a| a <= t).saturating_sub(1).min(last);
    let s = (t - anchor_times[k]) / (anchor_times[k + 1] - anchor_times[k]);
    Ok((k, s.clamp(0.0, 1.0)))
}

impl SurrogateModel {
    pub fn new(bundle: TransportBundle, anchors: ObservationSet, config: TrainingConfig) -> Result<Self> {
        if bundle.spec.anchor_times != anchors.anchor_times() {
            return Err(Error::Validation("anchor data does not cover the bundle's intervals".into()));
        }
        if !(anchors.time_map().scale > 0.0) {
            return Err(Error::Validation("time map must be increasing".into()));
        }
        Ok(Self {
            bundle,
            anchors,
            config,
            provenance: BTreeMap::new(),
        })
    }

    pub fn time_map(&self) -> TimeMap {
        self.anchors.time_map()
    }

    pub fn time_range(&self) -> (f64, f64) {
        let a = self.anchors.anchor_times();
        (a[0], a[a.len() - 1])
    }

    /// `n` draws from the surrogate at `(x, t)`.
    pub fn sample(&self, x: &Condition, t: f64, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        if n == 0 {
            return Err(Error::Validation("sample count must be positive".into()));
        }
        let (k, s) = locate(self.anchors.anchor_times(), t)?;
        let cond = self.bundle.encode(x)?;
        let base = self.anchors.samples(k, x);
        if base.is_empty() {
            return Err(Error::UnknownCondition(x.to_string()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok((0..n)
            .map(|_| {
                let y_k = base[rng.random_range(0..base.len())];
                let y_next = self.bundle.maps[k].forward(y_k, &cond);
                self.bundle.path_encoded(y_k, &y_next, &cond).eval(s).0
            })
            .collect())
    }

    /// Like [`SurrogateModel::sample`] with a raw hyperparameter value.
    pub fn sample_hyper(&self, x: &Condition, lambda: f64, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        let map = self.time_map();
        let (lo, hi) = self.time_range();
        let t = map.to_time(lambda);
        if !(t >= lo && t <= hi) {
            return Err(Error::Extrapolation {
                value: lambda,
                min: map.to_lambda(lo),
                max: map.to_lambda(hi),
            });
        }
        self.sample(x, t, n, seed)
    }

    /// Samples wrapped as output records.
    pub fn sample_records(&self, x: &Condition, t: f64, n: usize, seed: u64) -> Result<Vec<SampleRecord>> {
        let lambda = self.time_map().to_lambda(t);
        Ok(self
            .sample(x, t, n, seed)?
            .into_iter()
            .enumerate()
            .map(|(draw, y)| SampleRecord {
                y,
                x: x.clone(),
                t,
                lambda,
                seed,
                draw,
            })
            .collect())
    }

    fn params(&self) -> ParamVector {
        let b = &self.bundle;
        let names: Vec<String> = (0..b.num_intervals())
            .flat_map(|k| [format!("g{k}"), format!("T{k}")])
            .collect();
        let mut parts: Vec<(&str, &ParamVector)> = Vec::new();
        for k in 0..b.num_intervals() {
            parts.push((&names[2 * k], b.potentials[k].params()));
            parts.push((&names[2 * k + 1], b.maps[k].params()));
        }
        parts.push(("S", b.spline.params()));
        if let Some(m) = &b.lagrangian.metric {
            parts.push(("G", m.net().params()));
        }
        ParamVector::concat(parts)
    }

    pub fn write_to<W: std::io::Write>(&self, w: W) -> Result<()> {
        let lag = &self.bundle.lagrangian;
        let meta = Meta {
            bundle: self.bundle.spec.clone(),
            config: self.config.clone(),
            metric: lag.metric.as_ref().map(|m| MetricMeta {
                net: m.net().spec().clone(),
                budget: m.budget(),
                eigen: m.eigen_mode().clone(),
            }),
            potential: lag.potential.as_ref().map(|p| PotentialMeta {
                alpha: p.alpha(),
                eps: p.eps(),
                h_y: p.estimator().h_y(),
                h_x: p.estimator().h_x(),
            }),
            time_map: self.anchors.time_map(),
            anchors: self.anchors.records().to_vec(),
            provenance: self.provenance.clone(),
        };
        write_container(w, &serde_json::to_value(&meta)?, &self.params())
    }

    pub fn read_from<R: std::io::Read>(r: R) -> Result<Self> {
        let (meta, params) = read_container(r)?;
        let meta: Meta = serde_json::from_value(meta).map_err(|e| Error::Checkpoint(format!("bad metadata: {e}")))?;
        let anchors = ObservationSet::new(meta.anchors, meta.time_map, false)?;
        let part = |name: &str, spec: MlpSpec| -> Result<FilmMlp> {
            let p = params
                .extract(name)
                .ok_or_else(|| Error::Checkpoint(format!("missing parameters for `{name}`")))?;
            FilmMlp::from_params(spec, p).map_err(|e| Error::Checkpoint(format!("`{name}`: {e}")))
        };
        let spec = meta.bundle;
        let n = spec.num_intervals();
        let potentials = (0..n).map(|k| part(&format!("g{k}"), spec.potential_spec())).collect::<Result<_>>()?;
        let maps = (0..n).map(|k| part(&format!("T{k}"), spec.map_spec())).collect::<Result<_>>()?;
        let spline = part("S", spec.spline_spec())?;
        let metric = match meta.metric {
            Some(m) => Some(MetricField::from_net(part("G", m.net)?, spec.dim, m.budget, m.eigen)?),
            None => None,
        };
        let potential = match meta.potential {
            Some(p) => {
                let est = NwEstimator::new(anchors.records().iter().map(|r| (r.y.as_slice(), &r.x)), p.h_y, p.h_x)?;
                Some(Potential::new(est, p.alpha, p.eps)?)
            }
            None => None,
        };
        let bundle = TransportBundle::from_parts(spec, potentials, maps, spline, Lagrangian { metric, potential })?;
        let mut model = Self::new(bundle, anchors, meta.config)?;
        model.provenance = meta.provenance;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_to(BufWriter::new(fs::File::create(path)?))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(std::io::BufReader::new(fs::File::open(path)?))
    }

    /// Little-endian bytes of every parameter, in checkpoint order.
    pub fn payload_bytes(&self) -> Vec<u8> {
        self.params().values().iter().flat_map(|v| v.to_le_bytes()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_dataset, SemicircleConfig};
    use crate::diff::Activation;
    use crate::training::{init_bundle, Variant};

    fn tiny_cfg() -> TrainingConfig {
        TrainingConfig {
            num_knots: 3,
            quad_points: 8,
            metric_hidden: vec![8],
            potential_hidden: vec![8],
            map_hidden: vec![8],
            spline_hidden: vec![8],
            film_width: 4,
            activation: Activation::Tanh,
            ..TrainingConfig::default()
        }
    }

    fn model(variant: Variant) -> SurrogateModel {
        let data = gen_dataset(&SemicircleConfig { n: 10, ..SemicircleConfig::default() }).unwrap();
        let cfg = tiny_cfg().with_variant(variant);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut b = init_bundle(&data, &cfg, &mut rng).unwrap();
        b.spline = FilmMlp::new(b.spec.spline_spec(), &mut rng);
        SurrogateModel::new(b, data, cfg).unwrap()
    }

    #[test]
    fn locate_intervals() {
        let a = [0.0, 0.5, 1.0];
        assert_eq!(locate(&a, 0.75).unwrap(), (1, 0.5));
        assert_eq!(locate(&a, 0.5).unwrap(), (1, 0.0));
        assert_eq!(locate(&a, 1.0).unwrap(), (1, 1.0));
        assert_eq!(locate(&a, 0.0).unwrap(), (0, 0.0));
        assert!(matches!(locate(&a, 1.5), Err(Error::Extrapolation { .. })));
        assert!(locate(&a, -0.1).is_err());
        assert!(locate(&a, f64::NAN).is_err());
    }

    #[test]
    fn anchor_time_samples_are_anchor_points() {
        let m = model(Variant::KThetaU);
        let x = Condition::Discrete(2);
        let anchors: Vec<&[f64]> = m.anchors.samples(1, &x);
        for y in m.sample(&x, 0.5, 50, 3).unwrap() {
            assert!(anchors.iter().any(|a| *a == y.as_slice()));
        }
    }

    #[test]
    fn right_end_reaches_the_map_output() {
        let m = model(Variant::KI);
        let x = Condition::Discrete(1);
        let ys = m.sample(&x, 1.0, 5, 9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let base = m.anchors.samples(1, &x);
        for y in ys {
            let y_k = base[rng.random_range(0..base.len())];
            assert_eq!(y, m.bundle.predict_map(1, y_k, &x).unwrap());
        }
    }

    #[test]
    fn deterministic_and_continuous_in_time() {
        let m = model(Variant::KThetaU);
        let x = Condition::Discrete(3);
        assert_eq!(m.sample(&x, 0.3, 20, 5).unwrap(), m.sample(&x, 0.3, 20, 5).unwrap());
        let a = m.sample(&x, 0.3, 20, 5).unwrap();
        let b = m.sample(&x, 0.3 + 1e-7, 20, 5).unwrap();
        for (p, q) in a.iter().zip(&b) {
            let d: f64 = p.iter().zip(q).map(|(u, v)| (u - v).abs()).sum();
            assert!(d < 1e-4, "{d}");
        }
    }

    #[test]
    fn errors() {
        let m = model(Variant::KI);
        assert!(matches!(m.sample(&Condition::Discrete(1), 1.5, 1, 0), Err(Error::Extrapolation { .. })));
        assert!(matches!(m.sample(&Condition::Discrete(9), 0.5, 1, 0), Err(Error::UnknownCondition(_))));
        assert!(m.sample(&Condition::Discrete(1), 0.5, 0, 0).is_err());
    }

    #[test]
    fn hyperparameter_axis() {
        let mut m = model(Variant::KI);
        let records = m.anchors.records().to_vec();
        m.anchors = ObservationSet::new(records, TimeMap { offset: 0.0, scale: 10.0 }, true).unwrap();
        let x = Condition::Discrete(1);
        assert_eq!(m.sample_hyper(&x, 7.0, 4, 1).unwrap(), m.sample(&x, 0.7, 4, 1).unwrap());
        assert_eq!(m.sample_hyper(&x, 5.0, 4, 1).unwrap(), m.sample(&x, 0.5, 4, 1).unwrap());
        match m.sample_hyper(&x, 12.0, 4, 1) {
            Err(Error::Extrapolation { min, max, .. }) => assert_eq!((min, max), (0.0, 10.0)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        for v in [Variant::KThetaU, Variant::KI] {
            let mut m = model(v);
            m.provenance.insert("fingerprint".into(), "abc".into());
            let mut buf = Vec::new();
            m.write_to(&mut buf).unwrap();
            let back = SurrogateModel::read_from(buf.as_slice()).unwrap();
            assert_eq!(back.anchors, m.anchors);
            assert_eq!(back.config, m.config);
            assert_eq!(back.bundle.spec, m.bundle.spec);
            assert_eq!(back.bundle.potentials, m.bundle.potentials);
            assert_eq!(back.bundle.lagrangian.metric, m.bundle.lagrangian.metric);
            assert_eq!(back.bundle.lagrangian.potential, m.bundle.lagrangian.potential);
            assert_eq!(back, m);
            assert_eq!(back.payload_bytes(), m.payload_bytes());
        }
    }
}
