pub mod pcqm;
pub mod pointssim;
pub mod psnr;
pub mod graphsim;
