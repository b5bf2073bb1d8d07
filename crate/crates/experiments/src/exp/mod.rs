pub mod capacity;
pub mod denoise;
pub mod divergence;
pub mod failure;
pub mod gradcheck;
pub mod one_d;
pub mod response;
pub mod spectrum;
pub mod stride;
pub mod tones;
