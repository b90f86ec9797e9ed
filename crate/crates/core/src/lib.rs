pub mod classifier;
pub mod detector;
pub mod fatigue;
pub mod features;
pub mod harness;
pub mod imaging;
