//! Named estimator configurations used across the experiments.

use std::fmt;
use std::str::FromStr;

use tagk_core::estimators::{Estimator, KaczmarzVariant, KfState, RlsState};
use tagk_core::linalg::Vector;
use tagk_core::physics::PARAMS_PER_BODY;
use tagk_core::quadsim::{EstimatorDriver, OracleDriver, QuadModel};

/// Initial covariance scale for the recursive baselines.
pub const DEFAULT_P0: f64 = 1e2;
/// Measurement-noise scale for the Kalman baselines.
pub const DEFAULT_R_MEAS: f64 = 1e-2;

/// Stream id reserved for an estimator's own randomness within an episode
/// seed (setup and measurement noise use streams 0 and 1).
pub const ESTIMATOR_STREAM: u64 = 2;
/// Stream id for the shadow estimator in substitution runs.
pub const SHADOW_STREAM: u64 = 3;

/// The estimator grid: recursive baselines at two hyperparameter settings
/// each, the Kaczmarz family, and the ground-truth oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    RlsLow,
    RlsHigh,
    KfLow,
    KfHigh,
    Rk,
    Grk,
    Tark,
    Tagk,
    Oracle,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 9] = [
        EstimatorKind::RlsLow,
        EstimatorKind::RlsHigh,
        EstimatorKind::KfLow,
        EstimatorKind::KfHigh,
        EstimatorKind::Rk,
        EstimatorKind::Grk,
        EstimatorKind::Tark,
        EstimatorKind::Tagk,
        EstimatorKind::Oracle,
    ];

    /// The non-oracle estimators, i.e. everything that is benchmarked.
    pub const MEASURED: [EstimatorKind; 8] = [
        EstimatorKind::RlsLow,
        EstimatorKind::RlsHigh,
        EstimatorKind::KfLow,
        EstimatorKind::KfHigh,
        EstimatorKind::Rk,
        EstimatorKind::Grk,
        EstimatorKind::Tark,
        EstimatorKind::Tagk,
    ];

    /// The recursive baselines paired against TAG-K in the substitution
    /// study.
    pub const BASELINES: [EstimatorKind; 4] = [
        EstimatorKind::RlsLow,
        EstimatorKind::RlsHigh,
        EstimatorKind::KfLow,
        EstimatorKind::KfHigh,
    ];

    /// The Kaczmarz family compared in the ablation.
    pub const KACZMARZ: [EstimatorKind; 4] = [
        EstimatorKind::Rk,
        EstimatorKind::Tark,
        EstimatorKind::Grk,
        EstimatorKind::Tagk,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::RlsLow => "rls_low",
            EstimatorKind::RlsHigh => "rls_high",
            EstimatorKind::KfLow => "kf_low",
            EstimatorKind::KfHigh => "kf_high",
            EstimatorKind::Rk => "rk",
            EstimatorKind::Grk => "grk",
            EstimatorKind::Tark => "tark",
            EstimatorKind::Tagk => "tagk",
            EstimatorKind::Oracle => "oracle",
        }
    }

    pub fn kaczmarz_variant(&self) -> Option<KaczmarzVariant> {
        match self {
            EstimatorKind::Rk => Some(KaczmarzVariant::Rk),
            EstimatorKind::Grk => Some(KaczmarzVariant::Grk),
            EstimatorKind::Tark => Some(KaczmarzVariant::Tark),
            EstimatorKind::Tagk => Some(KaczmarzVariant::Tagk),
            _ => None,
        }
    }

    /// Whether closed-loop episodes screen this estimator's updates through
    /// the physical-consistency filter: baselines yes, TAG-K no (the other
    /// Kaczmarz variants follow their family default), oracle never needs it.
    pub fn default_safety_filter(&self) -> bool {
        !matches!(self, EstimatorKind::Tagk | EstimatorKind::Oracle)
    }

    /// Build the estimator with the given initial estimate. `seed`/`stream`
    /// feed the sampling randomness of the Kaczmarz variants; `iterations`
    /// of zero means one pass over the window rows.
    pub fn make_estimator(&self, theta0: &Vector, seed: u64, stream: u64) -> Option<Estimator> {
        match self {
            EstimatorKind::RlsLow => Some(Estimator::Rls(RlsState::new(
                theta0.clone(),
                DEFAULT_P0,
                0.99,
            ))),
            EstimatorKind::RlsHigh => Some(Estimator::Rls(RlsState::new(
                theta0.clone(),
                DEFAULT_P0,
                0.96,
            ))),
            EstimatorKind::KfLow => Some(Estimator::Kf(KfState::new(
                theta0.clone(),
                DEFAULT_P0,
                1e-3,
                DEFAULT_R_MEAS,
            ))),
            EstimatorKind::KfHigh => Some(Estimator::Kf(KfState::new(
                theta0.clone(),
                DEFAULT_P0,
                1e-1,
                DEFAULT_R_MEAS,
            ))),
            _ => self
                .kaczmarz_variant()
                .map(|v| Estimator::kaczmarz(v, 0, seed, stream)),
        }
    }

    /// Build the estimator for closed-loop quadrotor episodes. Same as
    /// [`make_estimator`](Self::make_estimator), but the Kaczmarz variants
    /// additionally get column equilibration from the vehicle's
    /// characteristic parameter scales: the inertial parameter vector mixes
    /// magnitudes across three orders (mass vs first moment vs inertia),
    /// which cripples raw row projections.
    pub fn make_quad_estimator(
        &self,
        model: &QuadModel,
        theta0: &Vector,
        seed: u64,
        stream: u64,
    ) -> Option<Estimator> {
        match self.kaczmarz_variant() {
            Some(v) => Some(Estimator::kaczmarz_scaled(
                v,
                0,
                parameter_scales(model),
                seed,
                stream,
            )),
            None => self.make_estimator(theta0, seed, stream),
        }
    }

    /// Build the episode driver for this kind.
    pub fn make_driver(
        &self,
        model: &QuadModel,
        theta0: &Vector,
        seed: u64,
        stream: u64,
    ) -> Box<dyn EstimatorDriver> {
        match self.make_quad_estimator(model, theta0, seed, stream) {
            Some(e) => Box::new(e),
            None => Box::new(OracleDriver),
        }
    }
}

/// Column scales for the Kaczmarz estimators on the quadrotor problem:
/// nominal mass for the mass entry, and a decade above the characteristic
/// magnitudes (mass x arm length, largest nominal inertia diagonal) for the
/// first-moment and inertia entries.
///
/// Pure magnitude equilibration leaves the mass column dominating every
/// force row, so the scaled force rows of a short window are nearly
/// parallel and measurement noise pushes row projections toward distant
/// pairwise intersections far from the least-squares point. Boosting the
/// remaining columns a decade widens the inter-row angles, which shrinks
/// that noise amplification by an order of magnitude at a bounded cost in
/// first-moment/inertia step size.
pub fn parameter_scales(model: &QuadModel) -> Vector {
    const COLUMN_BOOST: f64 = 10.0;
    let mass = model.nominal_params.mass();
    let moment = COLUMN_BOOST * mass * model.arm_length;
    let inertia = model.nominal_params.inertia_matrix();
    let inertia_scale =
        COLUMN_BOOST * (0..3).map(|i| inertia[(i, i)]).fold(0.0f64, f64::max);
    let mut scales = [inertia_scale; PARAMS_PER_BODY];
    scales[0] = mass;
    scales[1] = moment;
    scales[2] = moment;
    scales[3] = moment;
    Vector::from_slice(&scales)
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, thiserror::Error)]
#[error("unknown estimator name: {0}")]
pub struct UnknownEstimator(pub String);

impl FromStr for EstimatorKind {
    type Err = UnknownEstimator;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EstimatorKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| UnknownEstimator(s.to_owned()))
    }
}

/// Parse a comma-separated estimator list.
pub fn parse_estimator_list(s: &str) -> Result<Vec<EstimatorKind>, UnknownEstimator> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(EstimatorKind::from_str)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_roundtrip() {
        for kind in EstimatorKind::ALL {
            assert_eq!(kind.name().parse::<EstimatorKind>().unwrap(), kind);
        }
        assert!("bogus".parse::<EstimatorKind>().is_err());
    }

    #[test]
    fn list_parsing() {
        let kinds = parse_estimator_list("tagk, rls_low").unwrap();
        assert_eq!(kinds, vec![EstimatorKind::Tagk, EstimatorKind::RlsLow]);
        assert!(parse_estimator_list("tagk,nope").is_err());
    }

    #[test]
    fn safety_filter_defaults() {
        assert!(EstimatorKind::RlsLow.default_safety_filter());
        assert!(EstimatorKind::Rk.default_safety_filter());
        assert!(!EstimatorKind::Tagk.default_safety_filter());
    }
}
