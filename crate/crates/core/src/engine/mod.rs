//! Exact transcript laws, adversary enumeration, and schedule normalization.

mod enumerate;
mod induction;
mod normalize;
mod transcript;

pub use enumerate::{
    closed_form_count, count_adversaries, enumerate_adversaries, max_over_adversaries, AdversaryEnumeration, Branching,
    FreeBranching,
};
pub use induction::sup_by_induction;
pub use normalize::{normalize_alternating, pad_for_alternation, pad_pair, strip_padding};
pub use transcript::{joint_distribution, transcript_distribution, Setting, TranscriptDistribution};
pub(crate) use transcript::joint_masses;
