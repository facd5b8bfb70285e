//! Question templates, functional programs and the answer oracle.

mod execute;
mod generate;
mod io;
mod labels;
mod naive;
mod program;
mod template;
mod vocab;

use thiserror::Error;

pub use execute::{execute, ExecError, IllPosed};
pub use generate::{candidate_pool, generate_questions, generate_run, Balancer, GenerationConfig, RunOutput};
pub use io::{read_qa_jsonl, write_qa_jsonl, QaHeader};
pub use labels::{label_index, label_set, QuestionType, LABEL_COUNT};
pub use naive::execute_naive;
pub use program::{has_temporal_relation, validate, Kind, Node, Op, Program};
pub use template::{
    builtin_templates, fix_articles, instantiate, load_templates, parse_templates, permuted_scene, resolve, Bindings,
    Constraint, QaRecord, Rejected, SkeletonNode, Template,
};
pub use vocab::{tokenize, vocabulary, Vocabulary, PAD, UNK};

#[derive(Debug, Error)]
pub enum QuestionError {
    #[error("invalid program: {0}")]
    InvalidProgram(String),
    #[error("template `{id}`: {reason}")]
    InvalidTemplate { id: String, reason: String },
    #[error("scene `{scene_id}` yielded {accepted} of {wanted} questions")]
    Exhausted { scene_id: String, accepted: usize, wanted: usize },
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
