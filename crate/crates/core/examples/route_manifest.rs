//! Compile the layer routes of every sharing scheme and count how many
//! layers each pair of tasks shares.
//!
//! cargo run --example route_manifest -- [N]

use hnmt::langtree::{preprocess, sample_tree};
use hnmt::model::{compile_route, RouteManifest, Scheme};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(4);
    let tree = sample_tree();
    let hnmt_tree = preprocess(&tree, n)?;
    let tasks = [("es", "en"), ("es", "fi"), ("pt", "en"), ("de", "en")];
    for scheme in Scheme::ALL {
        let t = if scheme == Scheme::Hnmt { &hnmt_tree } else { &tree };
        let routes = tasks
            .iter()
            .map(|(s, g)| compile_route(t, s, g, scheme, n))
            .collect::<Result<Vec<_>, _>>()?;
        println!("== {scheme}");
        for (i, a) in routes.iter().enumerate() {
            for b in &routes[i + 1..] {
                let shared = a.layers().filter(|k| b.layers().any(|x| x == *k)).count();
                println!("  {} / {}: {shared} of {} layers shared", a.task_label(), b.task_label(), 2 * n);
            }
        }
        if scheme == Scheme::Hnmt {
            println!("{}", RouteManifest::new(scheme, n, &routes[..2]).to_json());
        }
    }
    Ok(())
}
