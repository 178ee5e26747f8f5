use pmsm_rom::fem::{sweep_full, FemModel};
use pmsm_rom::io::{read_matrix_market, read_snapshots_bin, read_snapshots_csv, write_matrix_market, write_snapshots_bin, write_snapshots_csv};
use pmsm_rom::machine::MachineSpec;
use pmsm_rom::mesh::build_mesh;

#[test]
fn machine_snapshots_and_matrices_survive_a_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let system = FemModel::new(&MachineSpec::coarse()).unwrap().system().unwrap();
    let (set, _) = sweep_full(&system, &[3, 0, 40]).unwrap();

    let csv = dir.path().join("s.csv");
    write_snapshots_csv(&csv, &set).unwrap();
    let back = read_snapshots_csv(&csv, set.dims).unwrap();
    assert_eq!(back.steps, set.steps);
    assert_eq!(back.matrix, set.matrix);

    let bin = dir.path().join("s.bin");
    write_snapshots_bin(&bin, &set).unwrap();
    let back = read_snapshots_bin(&bin).unwrap();
    assert_eq!(back.matrix, set.matrix);
    assert_eq!(back.column_of(40), set.column_of(40));

    let k = system.rotated(17).unwrap().matrix;
    let mtx = dir.path().join("k.mtx");
    write_matrix_market(&mtx, &k).unwrap();
    assert_eq!(read_matrix_market(&mtx).unwrap(), k);
}

#[test]
fn truncated_binary_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let system = FemModel::new(&MachineSpec::coarse()).unwrap().system().unwrap();
    let (set, _) = sweep_full(&system, &[1]).unwrap();
    let bin = dir.path().join("s.bin");
    write_snapshots_bin(&bin, &set).unwrap();
    let bytes = std::fs::read(&bin).unwrap();
    std::fs::write(&bin, &bytes[..bytes.len() - 8]).unwrap();
    assert_eq!(read_snapshots_bin(&bin).unwrap_err().exit_code(), 2);
}

#[test]
fn mesh_text_reproduces_coordinates_and_connectivity() {
    let mesh = build_mesh(&MachineSpec::coarse()).unwrap();
    let text = mesh.to_text();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let head: Vec<&str> = lines.next().unwrap().split_whitespace().collect();
    assert_eq!(head, ["nodes", &mesh.n_nodes().to_string()]);
    for (i, p) in mesh.nodes.iter().enumerate() {
        let f: Vec<&str> = lines.next().unwrap().split_whitespace().collect();
        assert_eq!(f[0].parse::<usize>().unwrap(), i);
        assert_eq!([f[1].parse::<f64>().unwrap(), f[2].parse::<f64>().unwrap()], *p);
    }
    let head: Vec<&str> = lines.next().unwrap().split_whitespace().collect();
    assert_eq!(head, ["triangles", &mesh.triangles.len().to_string()]);
    for t in &mesh.triangles {
        let f: Vec<usize> = lines.next().unwrap().split_whitespace().skip(1).map(|x| x.parse().unwrap()).collect();
        assert_eq!(&f[..3], &t.vertices);
        assert_eq!(f[3], t.region.tag());
    }
}
