//! Plaintext learning substrate: the desk-scale MLP with its loss and
//! gradients, local SGD, datasets, and client partitioning.

pub mod data;
pub mod mlp;

pub use data::{
    client_rng, iid_partition, load_idx_images, load_idx_labels, load_mnist, mnist_available,
    synth_blobs, Dataset,
};
pub use mlp::{clip_inf, local_update, Hyperparams, MlpArch, MlpModel};
