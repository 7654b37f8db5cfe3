pub mod align;
pub mod dsp;
pub mod eval;
pub mod ingest;
pub mod sweep;
pub mod synth;
pub mod probes;
