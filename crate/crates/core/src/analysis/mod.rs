//! Interpretability tools: exact t-SNE for embedding plots and mean
//! attention distance of transformer heads.

mod attention;
mod tsne;

pub use attention::{
    distances_svg, mean_attention_distance, write_distances_csv, AttentionStack, AttentionTensor, HeadDistance,
    AST_SPECIAL_TOKENS,
};
pub use tsne::{embedding_svg, joint_affinities, tsne, BandwidthFit, TsneConfig, TsneResult};
