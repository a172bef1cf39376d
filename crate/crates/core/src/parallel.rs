//! Order-preserving bounded parallel map over samples.

use std::collections::VecDeque;
use std::sync::Mutex;

/// Apply `f` to every item on up to `workers` threads, returning results in
/// input order. Output order is fixed regardless of scheduling, so callers
/// stay byte-reproducible.
pub fn par_map<T, R, F>(items: Vec<T>, workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let workers = workers.max(1).min(items.len().max(1));
    if workers <= 1 {
        return items.iter().map(&f).collect();
    }

    let queue: Mutex<VecDeque<usize>> = Mutex::new((0..items.len()).collect());
    let slots: Vec<Mutex<Option<R>>> = (0..items.len()).map(|_| Mutex::new(None)).collect();

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let index = match queue.lock().expect("queue poisoned").pop_front() {
                    Some(i) => i,
                    None => break,
                };
                let result = f(&items[index]);
                *slots[index].lock().expect("slot poisoned") = Some(result);
            });
        }
    });

    slots
        .into_iter()
        .map(|slot| slot.into_inner().expect("slot poisoned").expect("worker filled slot"))
        .collect()
}
