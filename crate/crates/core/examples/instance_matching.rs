//! Optimal one-to-one matching of two small instance sets by mask IoU.

use dyndepth::grid::Grid;
use dyndepth::temporal::{match_instances, Instance, InstanceSet};

fn rect(id: usize, class: u32, x0: usize, y0: usize, x1: usize, y1: usize) -> Instance {
    let mask = Grid::from_fn(20, 12, |x, y| (x0..=x1).contains(&x) && (y0..=y1).contains(&y));
    Instance::from_mask(id, class, mask).expect("non-empty")
}

fn main() {
    let prev = InstanceSet::new(vec![
        rect(0, 1, 1, 1, 5, 5),
        rect(1, 1, 6, 2, 10, 7),
        rect(2, 2, 12, 3, 16, 9),
    ]);
    // shifted copies, reordered, plus a newcomer and a class change
    let next = InstanceSet::new(vec![
        rect(0, 1, 8, 2, 12, 7),
        rect(1, 1, 2, 1, 6, 5),
        rect(2, 1, 13, 3, 17, 9),
        rect(3, 2, 15, 0, 19, 2),
    ]);
    for c in match_instances(&prev, &next) {
        println!(
            "prev {} -> next {}  IoU {:.3}  cost {:.3}",
            c.prev, c.next, c.iou, c.cost
        );
    }
}
