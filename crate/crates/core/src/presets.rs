//! Built-in channel models. Every preset uses `a = (1, 1)`.

use crate::channel::{DiscreteChannelModel, EquationCoefficients, Marginal};
use crate::continuous::ContinuousChannelModel;

pub fn coefficients() -> EquationCoefficients {
    EquationCoefficients::new(vec![1, 1]).expect("valid coefficients")
}

fn iid(values: &[f64], probs: &[f64]) -> DiscreteChannelModel {
    let m = Marginal::new(values.to_vec(), probs.to_vec());
    DiscreteChannelModel::from_marginals(vec![m.clone(), m]).expect("valid preset")
}

pub fn example1_marginals() -> Vec<Marginal> {
    vec![
        Marginal::new(vec![1.0, 3.0], vec![0.6, 0.4]),
        Marginal::new(vec![0.5, 2.0], vec![0.8, 0.2]),
    ]
}

/// Two users with two gains each, M = 4.
pub fn example1() -> DiscreteChannelModel {
    DiscreteChannelModel::from_marginals(example1_marginals()).expect("valid preset")
}

pub const EXAMPLE2_VALUES: [f64; 3] = [0.5, 1.0, 2.5];
pub const EXAMPLE2_PROBS: [f64; 3] = [0.1175, 0.2760, 0.6065];

/// Identically distributed users with three gains each, M = 9.
pub fn example2() -> DiscreteChannelModel {
    iid(&EXAMPLE2_VALUES, &EXAMPLE2_PROBS)
}

pub const EXAMPLE3_VALUES: [f64; 10] = [0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 2.5, 3.0, 4.0];
pub const EXAMPLE3_PROBS: [f64; 10] = [
    0.0308, 0.0867, 0.1277, 0.1483, 0.1487, 0.1332, 0.1893, 0.0914, 0.0328, 0.0111,
];

/// Identically distributed users with ten gains each, M = 100.
pub fn example3() -> DiscreteChannelModel {
    iid(&EXAMPLE3_VALUES, &EXAMPLE3_PROBS)
}

/// Gains 0.5 or 1 with equal probability for both users, M = 4.
pub fn remark() -> DiscreteChannelModel {
    iid(&[0.5, 1.0], &[0.5, 0.5])
}

pub fn gaussian() -> ContinuousChannelModel {
    ContinuousChannelModel::gaussian()
}
