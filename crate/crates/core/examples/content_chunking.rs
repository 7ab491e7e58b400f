//! Chunk a file into blocks, address them and put it back together.

use trickleswap::content::reassemble;
use trickleswap::{chunk_content, cid_of};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let file: Vec<u8> = (0..600_000u32).map(|i| (i % 251) as u8).collect();
    let blocks = chunk_content(&file, 256 * 1024)?;

    println!("{} bytes -> {} blocks", file.len(), blocks.len());
    for (i, b) in blocks.iter().enumerate() {
        println!("  block {i}: {} bytes  cid {}", b.size(), b.cid().prefix(8));
    }

    let tiny = cid_of(b"hello")?;
    println!("cid of \"hello\": {}", tiny.prefix(32));

    assert_eq!(reassemble(&blocks), file);
    println!("reassembled file matches");
    Ok(())
}
