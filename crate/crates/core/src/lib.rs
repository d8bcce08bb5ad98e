pub mod autodiff;
pub mod dqn;
pub mod eval;
pub mod experiment;
pub mod lang;
pub mod model;
pub mod seed;
pub mod world;
