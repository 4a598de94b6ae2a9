pub mod experiment;
pub mod generate;
pub mod llm;
pub mod pca;
pub mod report;
pub mod synth;
