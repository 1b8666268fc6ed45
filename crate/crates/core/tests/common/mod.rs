#![allow(dead_code)]

use std::thread;

use trackwatch::sim::{self, Scenario, SimOutput};

/// Runs `make(seed)` for every seed on all cores, results in seed order.
pub fn sweep<F>(seeds: std::ops::Range<u64>, make: F) -> Vec<SimOutput>
where
    F: Fn(u64) -> Scenario + Sync,
{
    let seeds: Vec<u64> = seeds.collect();
    let workers = thread::available_parallelism()
        .map_or(4, |n| n.get())
        .min(seeds.len().max(1));
    let chunk = seeds.len().div_ceil(workers).max(1);
    thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .chunks(chunk)
            .map(|part| {
                let make = &make;
                scope.spawn(move || {
                    part.iter()
                        .map(|&s| sim::run(&make(s)).expect("scenario runs"))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

/// Value of `key=` in an event detail string.
pub fn detail_field<'a>(detail: &'a str, key: &str) -> Option<&'a str> {
    detail
        .split(' ')
        .find_map(|kv| kv.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
}
