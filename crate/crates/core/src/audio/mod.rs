//! Warning-sound synthesis: parameter mapping, DSP and rendering.

pub mod filter;
pub mod live;
pub mod noise;
pub mod params;
pub mod synth;
pub mod trial;
pub mod wav;

pub use live::{AudioSink, Control, LiveRenderer};
pub use params::{map_params, NoiseSource, RenderConfig, SynthParams};
pub use synth::{render_block, SynthState};
pub use trial::{render_trial, ParamsTimeline, RenderedTrial, TimelineEntry};
