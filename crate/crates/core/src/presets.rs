//! Parameter sets used by the examples, the verification suites and the CLI
//! defaults.

use crate::gcp::MultiGcpParams;
use crate::shock::ShockModel;
use crate::subordinator::SubordinatorParams;
use crate::threshold::ThresholdDistribution;
use crate::timechanged::TcModelParams;

/// `θ = 0.5`, `a = (1, 1)`, `λ = 1`, rates `[[0.5], [0.5, 0.5]]`.
pub fn baseline_model() -> TcModelParams {
    baseline_model_with_lambda(1.0)
}

pub fn baseline_model_with_lambda(lambda: f64) -> TcModelParams {
    TcModelParams::new(
        MultiGcpParams::from_rates(vec![vec![0.5], vec![0.5, 0.5]]).expect("valid rates"),
        SubordinatorParams::new(lambda, 0.5, vec![1.0, 1.0]).expect("valid subordinator"),
    )
    .expect("matching dimensions")
}

pub fn geometric(p: f64) -> ThresholdDistribution {
    ThresholdDistribution::Geometric { p }
}

/// `N = 2`, `K = 1`, `n = 1`.
pub fn small_hypergeometric() -> ThresholdDistribution {
    ThresholdDistribution::Hypergeometric {
        population: 2,
        marked: 1,
        draws: 1,
    }
}

pub fn baseline_shock(threshold: ThresholdDistribution) -> ShockModel {
    ShockModel::new(baseline_model(), threshold).expect("valid threshold")
}

/// Two Poisson components with unit rates and `a = (1, 1)`, `θ = 0.5`.
pub fn unit_poisson_pair() -> TcModelParams {
    TcModelParams::new(
        MultiGcpParams::from_rates(vec![vec![1.0], vec![1.0]]).expect("valid rates"),
        SubordinatorParams::new(1.0, 0.5, vec![1.0, 1.0]).expect("valid subordinator"),
    )
    .expect("matching dimensions")
}
