//! Fixtures shared by the benchmarks in `benches/`.

use dck_core::mesh::{build_cube_mesh, build_pentagon_mesh};
use dck_core::{DiscreteProblem, Region, ScalarFn};

pub fn ball() -> Region {
    Region::Ball {
        center: [-0.1, -0.1, 0.0],
        radius: 0.2,
    }
}

/// Pentagon problem with `n` grid intervals, `ν = 1`, `y_Ω ≡ 1` and the
/// state-constraint ball marked.
pub fn pentagon(n: usize) -> DiscreteProblem {
    let mesh = build_pentagon_mesh(n).expect("valid subdivision");
    DiscreteProblem::new(mesh, Some(&ball()), ScalarFn::constant(1.0), 1.0).expect("problem setup")
}

/// Cube problem with `n` cubes per axis, `ν = 1` and `y_Ω ≡ 1`.
pub fn cube(n: usize) -> DiscreteProblem {
    let mesh = build_cube_mesh(n).expect("valid subdivision");
    DiscreteProblem::new(mesh, None, ScalarFn::constant(1.0), 1.0).expect("problem setup")
}
