//! Small maps used throughout the tests, the docs and the CLI demos.

use crate::map::{AffineBranch, Domain, ModOneFamily, PiecewiseContraction};
use crate::scalar::{ratio, Rational};

fn branch(slope: (i64, i64), intercept: (i64, i64)) -> AffineBranch<Rational> {
    AffineBranch::new(ratio(slope.0, slope.1), ratio(intercept.0, intercept.1))
}

/// Four branches of slope 1/2 with breakpoints 3/10, 3/5, 9/10 and
/// intercepts 1/3, 31/60, 1/10, -7/20.
pub fn fixture_a() -> PiecewiseContraction<Rational> {
    PiecewiseContraction::new(
        Domain::unit(),
        vec![ratio(3, 10), ratio(3, 5), ratio(9, 10)],
        vec![
            branch((1, 2), (1, 3)),
            branch((1, 2), (31, 60)),
            branch((1, 2), (1, 10)),
            branch((1, 2), (-7, 20)),
        ],
    )
    .expect("fixture A is a valid map")
}

pub fn fixture_a_family(delta: Rational) -> ModOneFamily<Rational> {
    ModOneFamily::new(fixture_a(), delta).expect("fixture A family")
}

/// The one-branch base `x ↦ -x/2 + 1/4`, whose shifted family has two
/// attracting fixed points for every small shift.
pub fn sharpness_base() -> PiecewiseContraction<Rational> {
    PiecewiseContraction::new_raw(Domain::unit(), vec![], vec![branch((-1, 2), (1, 4))]).expect("valid base")
}

pub fn sharpness_family(delta: Rational) -> ModOneFamily<Rational> {
    ModOneFamily::new(sharpness_base(), delta).expect("sharpness family")
}

/// `-x/2 + 1/4` on `[0, 1/2)` and `-x/2 + 5/4` on `[1/2, 1)`: the sharpness
/// family reduced at shift 0.
pub fn two_branch() -> PiecewiseContraction<Rational> {
    sharpness_family(ratio(0, 1)).reduce().expect("shift 0 reduces")
}

/// `x/4 + 3/5 | x/4 + 7/10` split at 1/2: both halves funnel into `(1/2, 1)`.
pub fn funnel() -> PiecewiseContraction<Rational> {
    PiecewiseContraction::new(
        Domain::unit(),
        vec![ratio(1, 2)],
        vec![branch((1, 4), (3, 5)), branch((1, 4), (7, 10))],
    )
    .expect("funnel is a valid map")
}

/// `x/4 + 7/16 | x/4 + 1/2` split at 1/2; its backward closure is
/// `{1/4, 1/2}` because 1/4 is the only preimage of 1/2.
pub fn two_point_closure() -> PiecewiseContraction<Rational> {
    PiecewiseContraction::new(
        Domain::unit(),
        vec![ratio(1, 2)],
        vec![branch((1, 4), (7, 16)), branch((1, 4), (1, 2))],
    )
    .expect("valid map")
}
