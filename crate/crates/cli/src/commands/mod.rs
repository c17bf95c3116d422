pub mod collapse;
pub mod detector;
pub mod fisher;
pub mod kappa;
pub mod replay;
pub mod steady;

pub use collapse::{cmd_collapse, CollapseOptions, CollapseRow};
pub use detector::{cmd_detector_demo, DetectorReport};
pub use fisher::{cmd_fisher, FisherOptions, FisherReport};
pub use kappa::{cmd_kappa_fit, KappaReport};
pub use replay::{cmd_replay, ReplayOptions};
pub use steady::{cmd_steady_scan, SteadyReport};
