//! Synthetic grasp data: parameter sampling, success-filtered episode
//! generation and the on-disk dataset format.

pub mod codec;
mod dataset;
mod generate;
mod record;
mod sampling;

pub use dataset::{
    build_id, for_each_record, read_dataset, read_manifest, record_line, write_dataset, Dataset, DatasetError,
    DatasetInfo, Manifest, EPISODES_FILE, FORMAT_VERSION, MANIFEST_FILE,
};
pub use generate::{generate, GenerateOptions, Generated};
pub use record::{
    episode_seed, project, replay, run_episode, start_seeded, EpisodeMeta, EpisodeRecord, EpisodeResult,
    ObservableAction, ReplayResult, StepRecord,
};
pub use sampling::{shorter_axis, SamplingSpec, SpecError};
