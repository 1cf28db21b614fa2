pub mod camera;
pub mod error;
pub mod events;
pub mod frames;
pub mod gmm;
pub mod kalman;
pub mod ltkf;
pub mod relloc;
pub mod scalar;
pub mod sim;

pub use scalar::Real;

pub type CameraModelF32 = camera::CameraModel<f32>;
pub type CameraModelF64 = camera::CameraModel<f64>;
pub type RelativePoseF32 = camera::RelativePose<f32>;
pub type RelativePoseF64 = camera::RelativePose<f64>;
pub type GmmModelF32 = gmm::GmmModel<f32>;
pub type GmmModelF64 = gmm::GmmModel<f64>;
pub type TrackerF32 = ltkf::Tracker<f32>;
pub type TrackerF64 = ltkf::Tracker<f64>;
pub type TdkfF32 = relloc::Tdkf<f32>;
pub type TdkfF64 = relloc::Tdkf<f64>;
pub type MadgwickF32 = relloc::Madgwick<f32>;
pub type MadgwickF64 = relloc::Madgwick<f64>;
pub type PoseEstimateF32 = relloc::PoseEstimate<f32>;
pub type PoseEstimateF64 = relloc::PoseEstimate<f64>;
