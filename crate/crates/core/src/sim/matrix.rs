use crate::instance::{Minutes, RailwayLine};

const FREE: u16 = 0;
const BLOCKED: u16 = 1;

/// Content of one (track, minute) cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Cell {
    Free,
    /// Headway band written around an arrival or before a departure.
    Blocked,
    Occupied(u32),
}

impl Cell {
    #[inline]
    pub(crate) fn encode(self) -> u16 {
        match self {
            Cell::Free => FREE,
            Cell::Blocked => BLOCKED,
            Cell::Occupied(id) => id as u16 + 1,
        }
    }

    #[inline]
    pub(crate) fn decode(raw: u16) -> Cell {
        match raw {
            FREE => Cell::Free,
            BLOCKED => Cell::Blocked,
            id => Cell::Occupied(u32::from(id) - 1),
        }
    }
}

#[inline]
pub(crate) fn occupied(id: u32) -> u16 {
    id as u16 + 1
}

#[inline]
pub(crate) fn is_free(raw: u16) -> bool {
    raw == FREE
}

#[inline]
pub(crate) fn is_blocked(raw: u16) -> bool {
    raw == BLOCKED
}

#[inline]
pub(crate) fn free_cell() -> u16 {
    FREE
}

#[inline]
pub(crate) fn blocked_cell() -> u16 {
    BLOCKED
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowKind {
    /// Track `track` (0-based) of station `station`.
    Station { station: usize, track: u16 },
    Section(usize),
}

/// Row bookkeeping for a line: station track rows interleaved with the
/// single section row between each pair of adjacent stations.
#[derive(Clone, Debug)]
pub struct RowLayout {
    station_first_row: Vec<usize>,
    station_tracks: Vec<u16>,
    section_row: Vec<usize>,
    kinds: Vec<RowKind>,
}

impl RowLayout {
    pub fn new(line: &RailwayLine) -> Self {
        let mut station_first_row = Vec::new();
        let mut station_tracks = Vec::new();
        let mut section_row = Vec::new();
        let mut kinds = Vec::new();
        for (j, st) in line.stations.iter().enumerate() {
            station_first_row.push(kinds.len());
            station_tracks.push(st.tracks);
            for k in 0..st.tracks {
                kinds.push(RowKind::Station { station: j, track: k });
            }
            if j < line.section_count() {
                section_row.push(kinds.len());
                kinds.push(RowKind::Section(j));
            }
        }
        RowLayout {
            station_first_row,
            station_tracks,
            section_row,
            kinds,
        }
    }

    pub fn row_count(&self) -> usize {
        self.kinds.len()
    }

    pub fn kind(&self, row: usize) -> RowKind {
        self.kinds[row]
    }

    pub fn station_row(&self, station: usize, track: u16) -> usize {
        debug_assert!(track < self.station_tracks[station]);
        self.station_first_row[station] + track as usize
    }

    pub fn station_tracks(&self, station: usize) -> u16 {
        self.station_tracks[station]
    }

    pub fn section_row(&self, section: usize) -> usize {
        self.section_row[section]
    }
}

/// Track-by-minute occupancy matrix, row-major.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct OccupancyMatrix {
    rows: usize,
    cols: usize,
    cells: Vec<u16>,
}

impl OccupancyMatrix {
    pub fn new(rows: usize, t_max: Minutes) -> Self {
        let cols = t_max as usize + 1;
        OccupancyMatrix {
            rows,
            cols,
            cells: vec![FREE; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// `t_max + 1`.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> Cell {
        Cell::decode(self.cells[row * self.cols + col])
    }

    pub fn set(&mut self, row: usize, col: usize, cell: Cell) {
        self.cells[row * self.cols + col] = cell.encode();
    }

    #[inline]
    pub(crate) fn raw(&self, row: usize, col: usize) -> u16 {
        self.cells[row * self.cols + col]
    }

    #[inline]
    pub(crate) fn raw_set(&mut self, row: usize, col: usize, v: u16) {
        self.cells[row * self.cols + col] = v;
    }

    pub(crate) fn raw_row(&self, row: usize) -> &[u16] {
        &self.cells[row * self.cols..(row + 1) * self.cols]
    }

    pub(crate) fn raw_row_mut(&mut self, row: usize) -> &mut [u16] {
        &mut self.cells[row * self.cols..(row + 1) * self.cols]
    }

    pub fn count(&self, pred: impl Fn(Cell) -> bool) -> usize {
        self.cells.iter().filter(|&&c| pred(Cell::decode(c))).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::bundled_line;

    #[test]
    fn corridor_layout_has_43_rows() {
        let layout = RowLayout::new(&bundled_line());
        assert_eq!(layout.row_count(), 9 * 3 + 7 + 9);
        assert_eq!(layout.station_row(0, 0), 0);
        assert_eq!(layout.section_row(0), 3);
        assert_eq!(layout.station_row(1, 0), 4);
        assert_eq!(layout.kind(42), RowKind::Station { station: 9, track: 6 });
        assert_eq!(layout.section_row(8), 35);
    }

    #[test]
    fn cell_codes_round_trip() {
        for c in [Cell::Free, Cell::Blocked, Cell::Occupied(1), Cell::Occupied(65533)] {
            assert_eq!(Cell::decode(c.encode()), c);
        }
    }
}
