//! Dense numerics shared by every model in the crate.

pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod optim;
pub mod param;
pub mod rng;
pub mod stats;
pub mod tensor;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use gradcheck::finite_diff_check;
pub use layers::{linear_forward, mlp2_forward, Linear, Mlp2, Mlp2Cache};
pub use loss::{argmax, softmax, softmax_ce_loss};
pub use optim::{adam_step, Adam};
pub use param::{Param, Parameterized};
pub use rng::Rng;
pub use stats::inverse_normal_cdf;
pub use tensor::{axpy, cosine_similarity, cosine_with_grad, dot, norm, Tensor1, Tensor2};
