//! Execution-mode switch: data-parallel inner loops on rayon, with a
//! sequential fallback when the `parallel` feature is disabled.

/// How independent work items (candidate sequences, fixtures, tasks) run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecMode {
    Sequential,
    #[cfg(feature = "parallel")]
    Parallel,
}

impl Default for ExecMode {
    fn default() -> Self {
        #[cfg(feature = "parallel")]
        return ExecMode::Parallel;
        #[cfg(not(feature = "parallel"))]
        ExecMode::Sequential
    }
}

/// Maps `f` over `items`, preserving input order in the output.
pub fn map_items<T, R, F>(mode: ExecMode, items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    match mode {
        ExecMode::Sequential => items.into_iter().map(f).collect(),
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => {
            use rayon::prelude::*;
            items.into_par_iter().map(f).collect()
        }
    }
}
