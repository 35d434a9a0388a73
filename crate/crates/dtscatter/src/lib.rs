//! Wave-packet simulation and the `dtscatter` command-line tool.

pub mod config;
pub mod run;
pub mod table;
pub mod wavepacket;
