#pragma once

#include <catch2/catch_amalgamated.hpp>

#include "zwanzig/zwanzig.hpp"

namespace zt {

using namespace zwanzig;

inline Matrix pauli_x() {
    Matrix m = Matrix::Zero(2, 2);
    m(0, 1) = 1.0;
    m(1, 0) = 1.0;
    return m;
}

inline Matrix pauli_y() {
    Matrix m = Matrix::Zero(2, 2);
    m(0, 1) = Complex(0.0, -1.0);
    m(1, 0) = Complex(0.0, 1.0);
    return m;
}

inline Matrix pauli_z() {
    Matrix m = Matrix::Zero(2, 2);
    m(0, 0) = 1.0;
    m(1, 1) = -1.0;
    return m;
}

inline HilbertSpace qubits(const std::vector<std::string>& labels) {
    std::vector<Factor> fs;
    for (const auto& l : labels) fs.push_back(Factor{l, 2});
    return HilbertSpace(std::move(fs));
}

// (|00> + |11>)/sqrt(2) on two labelled qubits.
inline PureState bell_pair(const std::string& a = "a", const std::string& b = "b") {
    HilbertSpace space = qubits({a, b});
    Vector v = Vector::Zero(4);
    v(0) = 1.0 / std::sqrt(2.0);
    v(3) = 1.0 / std::sqrt(2.0);
    return PureState(space, std::move(v));
}

// |000> + |111> on three labelled qubits, normalized.
inline PureState ghz(const std::string& a = "a", const std::string& b = "b",
                     const std::string& c = "c") {
    HilbertSpace space = qubits({a, b, c});
    Vector v = Vector::Zero(8);
    v(0) = 1.0 / std::sqrt(2.0);
    v(7) = 1.0 / std::sqrt(2.0);
    return PureState(space, std::move(v));
}

} // namespace zt
