//! Reverse-mode differentiation over the operation set used by the recurrence,
//! the root network and the losses, plus gradient clipping, the AdaBelief
//! optimizer and the reduce-on-plateau schedule.

mod optim;
mod tape;

pub use optim::{adabelief_step, clip_grad_norm, finite_diff_check, OptState, PlateauState};
pub(crate) use tape::conv_scan_forward;
pub use tape::{Grads, NodeId, Op, Tape, TransitionRef, UnaryKind};
