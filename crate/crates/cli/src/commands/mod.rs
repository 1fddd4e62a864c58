mod evaluate;
mod generate;
mod synth;
mod train;

pub use evaluate::{evaluate, EvaluateArgs};
pub use generate::{diversity, generate, DiversityArgs, GenerateArgs};
pub use synth::{synth, SynthArgs};
pub use train::{train, TrainArgs};
