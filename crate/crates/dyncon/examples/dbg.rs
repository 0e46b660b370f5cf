use dyncon::{BlockedForest, CfForest, HdtConnectivity, InsertMode, VertexId};

fn v(x: u32) -> VertexId {
    VertexId(x)
}

fn main() {
    println!("--- batch path ---");
    let mut bf = BlockedForest::new(8);
    let batch: Vec<_> = (0..7).map(|i| (v(i), v(i + 1))).collect();
    bf.batch_insert(&batch).unwrap();
    for x in 0..8 {
        println!("0-{x}: {}", bf.connected(v(0), v(x)));
    }
    for (a, b) in [(0u32, 1u32), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 7)] {
        println!("edge {a}-{b}: {:?}", bf.edge_record(v(a), v(b)));
    }

    println!("--- cf triangle ---");
    let mut cf = CfForest::new(8, InsertMode::Root);
    cf.insert(v(0), v(1)).unwrap();
    cf.insert(v(1), v(2)).unwrap();
    cf.insert(v(0), v(2)).unwrap();
    println!("pre-delete recs:");
    for (a, b) in [(0u32, 1u32), (1, 2), (0, 2)] {
        println!("  {a}-{b}: {:?}", cf.edge_record(v(a), v(b)));
    }
    cf.delete(v(0), v(1)).unwrap();
    println!("post delete(0,1): 0-1 {}", cf.connected(v(0), v(1)));
    for (a, b) in [(1u32, 2u32), (0, 2)] {
        println!("  {a}-{b}: {:?}", cf.edge_record(v(a), v(b)));
    }

    println!("--- hdt triangle ---");
    let mut h = HdtConnectivity::new(8);
    h.insert(v(0), v(1)).unwrap();
    h.insert(v(1), v(2)).unwrap();
    h.insert(v(0), v(2)).unwrap();
    h.delete(v(0), v(1)).unwrap();
    println!("post delete(0,1): 0-1 {}", h.connected(v(0), v(1)));
    println!("levels: {:?} {:?}", h.edge_level(v(1), v(2)), h.edge_level(v(0), v(2)));
}
