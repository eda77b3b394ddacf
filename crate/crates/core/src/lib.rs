pub mod model;
pub mod ops;
pub mod oracles;
pub mod solver;
pub mod bohm;
pub mod ensemble;
pub mod scenario;
