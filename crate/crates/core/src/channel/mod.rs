//! Radar echo synthesis and the multipath communication channel.

mod comm;
mod radar;
mod time;

pub use comm::{
    apply_comm_channel, build_comm_channel, comm_channel_from_parts, CommChannel, CommGeometry,
    Scatterer, ScattererLaw,
};
pub use radar::{
    add_radar_noise, noise_var_for_snr, synthesize_radar_freq, synthesize_radar_freq_noiseless,
    RadarCube, TargetRecord,
};
pub use time::{cube_from_time, max_delay_s, synthesize_radar_time};
