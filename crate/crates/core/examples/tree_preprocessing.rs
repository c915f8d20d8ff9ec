//! Prune, depth-limit and duplicate a language tree, then print the
//! pairwise similarity matrix.
//!
//! cargo run --example tree_preprocessing -- [tree.json] [N]

use hnmt::langtree::{duplicate_leaves, limit_depth, parse_tree, prune_redundant_families, sample_tree, similarity};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let tree = match args.next() {
        Some(p) => parse_tree(&std::fs::read_to_string(p)?)?,
        None => sample_tree(),
    };
    let n: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(4);

    println!("input\n{}", tree.render());
    let pruned = prune_redundant_families(&tree);
    println!("pruned\n{}", pruned.render());
    let limited = limit_depth(&pruned, n - 2)?;
    println!("limited to {} families\n{}", n - 2, limited.render());
    let dup = duplicate_leaves(&limited, n - 2)?;
    println!("duplicated to depth {}\n{}", n - 2, dup.render());

    let langs: Vec<&str> = tree.languages().collect();
    print!("{:>4}", "");
    for b in &langs {
        print!("{b:>4}");
    }
    println!();
    for a in &langs {
        print!("{a:>4}");
        for b in &langs {
            print!("{:>4}", similarity(&tree, a, b)?);
        }
        println!();
    }
    Ok(())
}
