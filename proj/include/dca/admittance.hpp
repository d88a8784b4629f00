#pragma once

// Bus admittance matrix assembly (pi-model, tap on the from side).

#include <map>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCore>

#include "dca/grid.hpp"
#include "dca/partition.hpp"

namespace dca {

using SparseComplex = Eigen::SparseMatrix<Complex>;

// Stable bus id <-> matrix index mapping over a sorted bus list.
struct BusIndex {
  std::vector<int> ids;          // ascending
  std::map<int, int> index_of;

  explicit BusIndex(const std::vector<Bus>& buses) {
    for (const auto& b : buses) {
      index_of[b.id] = static_cast<int>(ids.size());
      ids.push_back(b.id);
    }
  }

  int at(int bus_id) const {
    auto it = index_of.find(bus_id);
    if (it == index_of.end())
      throw ReferenceError("bus " + std::to_string(bus_id) + " not in index");
    return it->second;
  }

  int size() const { return static_cast<int>(ids.size()); }
};

// Series/shunt stamps of one branch: (Yff, Yft, Ytf, Ytt).
struct BranchStamp {
  Complex ff, ft, tf, tt;
};

inline BranchStamp branch_stamp(const Branch& br) {
  if (br.r == 0.0 && br.x == 0.0)
    throw ZeroImpedanceError("branch " + std::to_string(br.id) + " has r = x = 0");
  Complex y = 1.0 / Complex(br.r, br.x);
  Complex ysh(0.0, br.b_charging / 2.0);
  double t = br.tap_ratio;
  return BranchStamp{(y + ysh) / (t * t), -y / t, -y / t, y + ysh};
}

inline SparseComplex build_admittance_matrix(const std::vector<Bus>& buses,
                                             const std::vector<Branch>& branches,
                                             const BusIndex& index) {
  std::vector<Eigen::Triplet<Complex>> trip;
  trip.reserve(branches.size() * 4 + buses.size());
  for (const auto& br : branches) {
    auto st = branch_stamp(br);
    int f = index.at(br.from_bus);
    int t = index.at(br.to_bus);
    trip.emplace_back(f, f, st.ff);
    trip.emplace_back(f, t, st.ft);
    trip.emplace_back(t, f, st.tf);
    trip.emplace_back(t, t, st.tt);
  }
  for (const auto& b : buses)
    trip.emplace_back(index.at(b.id), index.at(b.id), Complex(b.shunt_g, b.shunt_b));
  SparseComplex Y(index.size(), index.size());
  Y.setFromTriplets(trip.begin(), trip.end());
  return Y;
}

inline SparseComplex build_admittance_matrix(const RegionGrid& grid) {
  return build_admittance_matrix(grid.buses, grid.branches, BusIndex(grid.buses));
}

inline SparseComplex build_admittance_matrix(const GridCase& gc) {
  return build_admittance_matrix(gc.buses, gc.branches, BusIndex(gc.buses));
}

}  // namespace dca
