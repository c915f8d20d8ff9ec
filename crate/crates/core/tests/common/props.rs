//! Property checks shared by the proptest suites and the acceptance gate.
//! Each returns a description of the first violation.

use std::collections::BTreeSet;

use hnmt::langtree::{duplicate_leaves, limit_depth, preprocess, prune_redundant_families, similarity, LanguageTree};
use hnmt::model::{compile_route, LayerKey, Scheme};

fn langs(t: &LanguageTree) -> Vec<String> {
    t.languages().map(String::from).collect()
}

pub fn tree_algebra(tree: &LanguageTree) -> Result<(), String> {
    let once = prune_redundant_families(tree);
    let twice = prune_redundant_families(&once);
    if once != twice {
        return Err(format!("pruning not idempotent:\n{}\nvs\n{}", once.render(), twice.render()));
    }
    let original = langs(tree);
    if langs(&once) != original {
        return Err("pruning changed the language set".into());
    }
    for d in 1..=4 {
        let limited = limit_depth(tree, d).map_err(|e| e.to_string())?;
        let dup = duplicate_leaves(&limited, d).map_err(|e| e.to_string())?;
        if langs(&limited) != original || langs(&dup) != original {
            return Err(format!("depth {d}: language set changed"));
        }
        for l in &original {
            let n = dup.family_chain(l).unwrap().len();
            if n != d {
                return Err(format!("depth {d}: {l} has {n} families\n{}", dup.render()));
            }
        }
    }
    for a in &original {
        let ca = tree.family_chain(a).unwrap().len();
        if similarity(tree, a, a).unwrap() != ca {
            return Err(format!("similarity({a},{a}) != chain length"));
        }
        for b in &original {
            let s = similarity(tree, a, b).unwrap();
            if s != similarity(tree, b, a).unwrap() {
                return Err(format!("similarity({a},{b}) not symmetric"));
            }
            if s > ca.min(tree.family_chain(b).unwrap().len()) {
                return Err(format!("similarity({a},{b}) exceeds a chain length"));
            }
        }
    }
    Ok(())
}

fn shared_prefix(a: &[LayerKey], b: &[LayerKey]) -> usize {
    a.iter().zip(b).take_while(|(x, y)| x == y).count()
}

pub fn sharing_semantics(tree: &LanguageTree, layers: usize) -> Result<(), String> {
    let prepped = preprocess(tree, layers).map_err(|e| e.to_string())?;
    let pruned = prune_redundant_families(tree);
    let all = langs(tree);
    let pairs: Vec<(&String, &String)> = all.iter().flat_map(|a| all.iter().map(move |b| (a, b))).filter(|(a, b)| a != b).collect();
    for scheme in Scheme::ALL {
        let t = if scheme == Scheme::Hnmt { &prepped } else { tree };
        let routes: Vec<_> = pairs
            .iter()
            .map(|(a, b)| compile_route(t, a, b, scheme, layers).map_err(|e| e.to_string()))
            .collect::<Result<_, _>>()?;
        for r in &routes {
            if r.encoder_layers.len() != layers || r.decoder_layers.len() != layers {
                return Err(format!("{scheme} {}: route is not {layers} deep", r.task_label()));
            }
            if r.needs_target_token != matches!(scheme, Scheme::ManyToOne | Scheme::OneToOne) {
                return Err(format!("{scheme}: wrong target-token flag"));
            }
        }
        match scheme {
            Scheme::ManyToMany => {
                let mut seen = BTreeSet::new();
                for r in &routes {
                    for k in r.layers() {
                        if !seen.insert(k.clone()) {
                            return Err(format!("many-to-many key {k} shared"));
                        }
                    }
                }
            }
            Scheme::OneToOne => {
                if routes.windows(2).any(|w| w[0].encoder_layers != w[1].encoder_layers || w[0].decoder_layers != w[1].decoder_layers) {
                    return Err("one-to-one routes differ".into());
                }
            }
            Scheme::Hnmt => {
                let within = |l: &str| pruned.family_chain(l).unwrap().len() <= layers - 2;
                for x in &routes {
                    for y in &routes {
                        if x.target != y.target && within(&x.target) && within(&y.target) {
                            let s = similarity(&pruned, &x.target, &y.target).unwrap();
                            let p = shared_prefix(&x.decoder_layers, &y.decoder_layers);
                            if p != 1 + s {
                                return Err(format!("decoders of {} and {} share {p} layers, similarity {s}", x.target, y.target));
                            }
                        }
                        if x.source != y.source && within(&x.source) && within(&y.source) {
                            let s = similarity(&pruned, &x.source, &y.source).unwrap();
                            let mut ex = x.encoder_layers.clone();
                            let mut ey = y.encoder_layers.clone();
                            ex.reverse();
                            ey.reverse();
                            let p = shared_prefix(&ex, &ey);
                            if p != 1 + s {
                                return Err(format!("encoders of {} and {} share {p} top layers, similarity {s}", x.source, y.source));
                            }
                        }
                    }
                }
            }
            _ => {}
        }
    }
    Ok(())
}
