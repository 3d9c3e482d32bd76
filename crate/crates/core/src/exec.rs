//! Data-parallel sweeps over index ranges.
//!
//! Every helper has a `_seq` form that is always available and a `_par` form
//! backed by rayon when the `parallel` feature is on. The unsuffixed names
//! dispatch to the parallel form when it exists. Results never depend on which
//! form ran or on the worker count.

use std::ops::Range;

pub fn count_seq<F>(range: Range<u64>, f: F) -> u64
where
    F: Fn(u64) -> bool,
{
    range.filter(|&i| f(i)).count() as u64
}

pub fn all_seq<F>(range: Range<u64>, f: F) -> bool
where
    F: Fn(u64) -> bool,
{
    range.into_iter().all(f)
}

pub fn find_first_seq<F>(range: Range<u64>, f: F) -> Option<u64>
where
    F: Fn(u64) -> bool,
{
    range.into_iter().find(|&i| f(i))
}

pub fn map_collect_seq<T, F>(range: Range<u64>, f: F) -> Vec<T>
where
    F: Fn(u64) -> T,
{
    range.map(f).collect()
}

/// Like [`find_first_seq`] but with per-worker scratch state.
pub fn find_first_with_seq<S, I, F>(range: Range<u64>, init: I, f: F) -> Option<u64>
where
    I: Fn() -> S,
    F: Fn(&mut S, u64) -> bool,
{
    let mut state = init();
    range.into_iter().find(|&i| f(&mut state, i))
}

pub fn map_collect_with_seq<S, T, I, F>(range: Range<u64>, init: I, f: F) -> Vec<T>
where
    I: Fn() -> S,
    F: Fn(&mut S, u64) -> T,
{
    let mut state = init();
    range.map(|i| f(&mut state, i)).collect()
}

#[cfg(feature = "parallel")]
mod par {
    use super::Range;
    use rayon::prelude::*;

    pub fn count_par<F>(range: Range<u64>, f: F) -> u64
    where
        F: Fn(u64) -> bool + Sync + Send,
    {
        range.into_par_iter().filter(|&i| f(i)).count() as u64
    }

    pub fn all_par<F>(range: Range<u64>, f: F) -> bool
    where
        F: Fn(u64) -> bool + Sync + Send,
    {
        range.into_par_iter().all(f)
    }

    pub fn find_first_par<F>(range: Range<u64>, f: F) -> Option<u64>
    where
        F: Fn(u64) -> bool + Sync + Send,
    {
        range.into_par_iter().find_first(|&i| f(i))
    }

    pub fn map_collect_par<T, F>(range: Range<u64>, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        range.into_par_iter().map(f).collect()
    }

    pub fn find_first_with_par<S, I, F>(range: Range<u64>, init: I, f: F) -> Option<u64>
    where
        I: Fn() -> S + Sync + Send,
        F: Fn(&mut S, u64) -> bool + Sync + Send,
    {
        range
            .into_par_iter()
            .map_init(init, |s, i| f(s, i).then_some(i))
            .find_first(Option::is_some)
            .flatten()
    }

    pub fn map_collect_with_par<S, T, I, F>(range: Range<u64>, init: I, f: F) -> Vec<T>
    where
        T: Send,
        I: Fn() -> S + Sync + Send,
        F: Fn(&mut S, u64) -> T + Sync + Send,
    {
        range.into_par_iter().map_init(init, f).collect()
    }
}

#[cfg(feature = "parallel")]
pub use par::*;

#[cfg(feature = "parallel")]
mod dispatch {
    pub use super::par::{
        all_par as all, count_par as count, find_first_par as find_first,
        find_first_with_par as find_first_with, map_collect_par as map_collect,
        map_collect_with_par as map_collect_with,
    };
}

#[cfg(not(feature = "parallel"))]
mod dispatch {
    pub use super::{
        all_seq as all, count_seq as count, find_first_seq as find_first,
        find_first_with_seq as find_first_with, map_collect_seq as map_collect,
        map_collect_with_seq as map_collect_with,
    };
}

pub use dispatch::*;
