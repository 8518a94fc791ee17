//! Archive formats shared by the `pme4` binary and its tests.

pub mod archive;
