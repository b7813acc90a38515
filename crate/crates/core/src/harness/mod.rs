//! Toy-problem construction, demo orchestration and the verification suite.

mod dataset;
mod demo;
mod landscape;
mod oracles;
mod verify;

pub use dataset::{linspace, make_grid_dataset, Target};
pub use demo::{
    demo_dataset, demo_init, demo_landscape_specs, exact_demo_params, run_demo, DemoOutcome,
    DemoRow, SliceSpec,
};
pub use landscape::{landscape_slice, Axis, LandscapeSlice};
pub use oracles::{fd_gradient, fd_hessian, fd_model_hessian, random_layout, random_model};
pub use verify::{verify_suite, verify_suite_with, Fixture, PropertyCheck, VerifyReport};
