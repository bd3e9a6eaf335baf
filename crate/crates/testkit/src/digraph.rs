//! Random directed graphs, install corpora built on them, and brute-force
//! reference answers.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Digraph {
    pub n: usize,
    /// Distinct `(from, to)` pairs without self-loops.
    pub edges: Vec<(usize, usize)>,
}

/// Extension id for node `i`; zero-padded so id order is node order.
pub fn node_id(i: usize) -> String {
    format!("pub{i:03}.ext{i:03}")
}

pub fn random_digraph<R: Rng>(rng: &mut R, max_nodes: usize, density: f64) -> Digraph {
    let n = rng.gen_range(0..=max_nodes);
    digraph_with_nodes(rng, n, density)
}

pub fn digraph_with_nodes<R: Rng>(rng: &mut R, n: usize, density: f64) -> Digraph {
    let mut edges = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if a != b && rng.gen_bool(density.clamp(0.0, 1.0)) {
                edges.push((a, b));
            }
        }
    }
    Digraph { n, edges }
}

pub fn random_dag<R: Rng>(rng: &mut R, max_nodes: usize, density: f64) -> Digraph {
    let mut g = random_digraph(rng, max_nodes, density);
    let order: Vec<usize> = {
        let mut o: Vec<usize> = (0..g.n).collect();
        rand::seq::SliceRandom::shuffle(o.as_mut_slice(), rng);
        o
    };
    g.edges.retain(|&(a, b)| order[a] < order[b]);
    g
}

/// Every simple path with at least `min_len` nodes, grown breadth-first
/// from single nodes using the adjacency matrix.
pub fn simple_paths_bruteforce(g: &Digraph, min_len: usize) -> BTreeSet<Vec<usize>> {
    let mut matrix = vec![vec![false; g.n]; g.n];
    for &(a, b) in &g.edges {
        matrix[a][b] = true;
    }
    let mut out = BTreeSet::new();
    let mut frontier: Vec<Vec<usize>> = (0..g.n).map(|i| vec![i]).collect();
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for p in frontier {
            if p.len() >= min_len {
                out.insert(p.clone());
            }
            let last = *p.last().unwrap();
            for (t, &edge) in matrix[last].iter().enumerate() {
                if edge && !p.contains(&t) {
                    let mut q = p.clone();
                    q.push(t);
                    next.push(q);
                }
            }
        }
        frontier = next;
    }
    out
}

/// `installed_by` for every node via the transposed matrix.
pub fn predecessors(g: &Digraph) -> Vec<BTreeSet<usize>> {
    let mut t = vec![BTreeSet::new(); g.n];
    for &(a, b) in &g.edges {
        t[b].insert(a);
    }
    t
}

/// One extension of a generated install corpus.
#[derive(Debug, Clone)]
pub struct CorpusNode {
    pub id: String,
    pub manifest: String,
    /// Literal targets of silent-install command calls in its source.
    pub command_targets: Vec<String>,
    pub has_network: bool,
    pub vt_malicious: bool,
    pub has_cve: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AttributeLedger {
    pub installers: u64,
    pub installed: u64,
    pub installed_with_network: u64,
    pub installed_vt_positive: u64,
    pub installed_with_cve: u64,
}

#[derive(Debug, Clone)]
pub struct InstallCorpus {
    pub nodes: Vec<CorpusNode>,
    /// Expected counts, tallied while placing edges and attributes.
    pub ledger: AttributeLedger,
    /// Ids referenced as targets but absent from the corpus.
    pub stubs: BTreeSet<String>,
}

/// A corpus of `n` extensions whose install edges are spread over the three
/// mechanisms, with duplicate declarations, mixed-case ids, stub targets,
/// self references and malformed ids sprinkled in.
pub fn install_corpus(seed: u64, n: usize) -> InstallCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = digraph_with_nodes(&mut rng, n, 2.5 / n.max(1) as f64);
    let mut packs = vec![Vec::new(); n];
    let mut deps = vec![Vec::new(); n];
    let mut cmds = vec![Vec::new(); n];
    let mut incoming = vec![false; n];
    let mut outgoing = vec![false; n];
    let mut stubs = BTreeSet::new();
    let spell = |rng: &mut ChaCha8Rng, id: &str| if rng.gen_bool(0.2) { id.to_uppercase() } else { id.to_string() };
    for &(a, b) in &g.edges {
        let target = spell(&mut rng, &node_id(b));
        match rng.gen_range(0..3) {
            0 => packs[a].push(target.clone()),
            1 => deps[a].push(target.clone()),
            _ => cmds[a].push(target.clone()),
        }
        if rng.gen_bool(0.1) {
            packs[a].push(target);
        }
        incoming[b] = true;
        outgoing[a] = true;
    }
    let mut stub_installed = 0;
    for (a, pack) in packs.iter_mut().enumerate() {
        if rng.gen_bool(0.08) {
            let stub = format!("stub{a:03}.missing");
            pack.push(stub.clone());
            stubs.insert(stub);
            stub_installed += 1;
            outgoing[a] = true;
        }
        if rng.gen_bool(0.05) {
            pack.push(node_id(a));
        }
        if rng.gen_bool(0.05) {
            pack.push("not an id".into());
        }
    }

    let mut ledger = AttributeLedger { installed: stub_installed, ..Default::default() };
    let mut nodes = Vec::with_capacity(n);
    for i in 0..n {
        let (has_network, vt_malicious, has_cve) = (rng.gen_bool(0.3), rng.gen_bool(0.15), rng.gen_bool(0.25));
        if incoming[i] {
            ledger.installed += 1;
            ledger.installed_with_network += u64::from(has_network);
            ledger.installed_vt_positive += u64::from(vt_malicious);
            ledger.installed_with_cve += u64::from(has_cve);
        }
        ledger.installers += u64::from(outgoing[i]);
        let id = node_id(i);
        let (publisher, name) = id.split_once('.').unwrap();
        let mut doc = json!({"publisher": publisher, "name": name, "version": "1.0.0"});
        if !packs[i].is_empty() {
            doc["extensionPack"] = json!(packs[i]);
        }
        if !deps[i].is_empty() {
            doc["extensionDependencies"] = json!(deps[i]);
        }
        nodes.push(CorpusNode {
            id,
            manifest: serde_json::to_string_pretty(&doc).unwrap(),
            command_targets: cmds[i].clone(),
            has_network,
            vt_malicious,
            has_cve,
        });
    }
    InstallCorpus { nodes, ledger, stubs }
}
