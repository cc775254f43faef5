//! The two-stage network: a 3D U-Net style encoder and coarse decoder,
//! recurrent slice propagation on the coarse map, a fine decoder, and the
//! soft dice loss.

mod checkpoint;
mod config;
mod loss;
mod net;
mod slices;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use config::{Ablation, DiceLossConfig, LtspNetConfig};
pub use loss::{dice_loss, foreground, predict};
pub use net::{LtspNet, Param, ParamGroup, Pass, Skips};
pub use slices::{
    ltsp_cell_step, propagate_slices, split_slices, stack_slices, CellParams, CellState, PropagationParams,
};
