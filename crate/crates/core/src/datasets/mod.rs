//! Instances, tasks, benchmarks and everything that shapes the task stream.

pub mod io;
pub mod memory;
pub mod partition;
pub mod split;
pub mod synth;
pub mod types;

pub use io::{load_jsonl, load_partition, load_relation_vectors, write_jsonl, write_partition};
pub use memory::{memory_select, InstanceEncoder, MemoryBuffer, SelectionStrategy};
pub use partition::{partition_kmeans, partition_random, relation_name_vectors};
pub use split::{split_train_test, Split};
pub use synth::{generate_synthetic, RelationCluster, SynthConfig, SynthOutput};
pub use types::{build_tasks, relation_name_tokens, Benchmark, Instance, RunOrder, Task, Vocabulary};
