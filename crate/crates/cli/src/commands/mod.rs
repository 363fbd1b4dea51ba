//! One module per subcommand; each defines its config schema and `run`.

pub mod gen_esn;
pub mod mc;
pub mod narma;
pub mod profile;
pub mod reduce;
pub mod stability;
pub mod timing;
pub mod train;
