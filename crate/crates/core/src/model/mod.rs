//! Dual encoder, matching loss, training loop and checkpoints.

mod batch;
mod checkpoint;
mod config;
mod dual;
mod image;
mod layers;
mod loss;
mod text;
mod train;

pub use batch::{assemble_batch, batch_from_labels, render_mode, study_labels, LabeledBatch, MemoProvider, TrainExample};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, RngState, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub(crate) use checkpoint::write_atomic;
pub use config::{LossMode, ModelConfig, Switches, TextEncoderKind, TrainConfig};
pub use dual::{DualEncoder, ModelParams, StepOutput};
pub use image::{ConvLayer, ImageEncoder};
pub use layers::{normalize_rows, normalize_rows_backward, Linear, Tensors};
pub use loss::{itm_loss, similarity_matrix, LOSS_EPS};
pub use text::{word_tokens, Attention, TextEncoder, Vocab, MASK_ID, UNK_ID, UNK_TOKEN};
pub use train::{lr_at, prepare, train, LogRecord, Prepared, TrainOutput};
