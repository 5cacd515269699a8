//! Continuous-time LTI plants, exact zero-order-hold propagation and
//! discrete state-feedback design.

mod design;
mod model;
mod reference;

pub use design::{
    closed_loop_poles, control_output, design_controller, feedforward_gain, place_gains,
    ControllerGains, Pole,
};
pub use model::{discretize, expm, PlantModel, ZohPropagator};
pub use reference::{reference_value, SquareWave};
