#pragma once

#include "spectrabench/error.hpp"
#include "spectrabench/linalg.hpp"

#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

namespace spectrabench {

/// Little-endian binary writer used for the fitted-artifact container.
///
/// Layout primitives: u8/u32/u64/i64/f64 are fixed width; strings and vectors
/// are a u64 length followed by the elements; matrices are u64 rows, u64 cols,
/// then column-major f64 values.
class ByteWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) { raw(&v, sizeof v); }
    void u64(std::uint64_t v) { raw(&v, sizeof v); }
    void i64(std::int64_t v) { raw(&v, sizeof v); }
    void f64(double v) { raw(&v, sizeof v); }
    void boolean(bool v) { u8(v ? 1 : 0); }

    void str(std::string_view s) {
        u64(s.size());
        buf_.append(s.data(), s.size());
    }

    void magic(std::string_view tag) { buf_.append(tag.data(), tag.size()); }

    void f64s(const std::vector<double>& v) {
        u64(v.size());
        for (double x : v) f64(x);
    }

    void ints(const std::vector<int>& v) {
        u64(v.size());
        for (int x : v) i64(x);
    }

    void vec(const Vector& v) {
        u64(static_cast<std::uint64_t>(v.size()));
        for (Eigen::Index i = 0; i < v.size(); ++i) f64(v[i]);
    }

    void mat(const Matrix& m) {
        u64(static_cast<std::uint64_t>(m.rows()));
        u64(static_cast<std::uint64_t>(m.cols()));
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            for (Eigen::Index i = 0; i < m.rows(); ++i) f64(m(i, j));
    }

    const std::string& bytes() const { return buf_; }
    std::string take() { return std::move(buf_); }

private:
    void raw(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }

    std::string buf_;
};

class ByteReader {
public:
    explicit ByteReader(std::string_view data) : data_(data) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
    std::uint32_t u32() { return pod<std::uint32_t>(); }
    std::uint64_t u64() { return pod<std::uint64_t>(); }
    std::int64_t i64() { return pod<std::int64_t>(); }
    double f64() { return pod<double>(); }
    bool boolean() { return u8() != 0; }

    std::string str() {
        const auto n = length();
        return std::string(take(n));
    }

    void expect_magic(std::string_view tag) {
        if (take(tag.size()) != tag) {
            throw ParseError("bad artifact magic, expected '" + std::string(tag) + "'");
        }
    }

    std::vector<double> f64s() {
        std::vector<double> v(length());
        for (auto& x : v) x = f64();
        return v;
    }

    std::vector<int> ints() {
        std::vector<int> v(length());
        for (auto& x : v) x = static_cast<int>(i64());
        return v;
    }

    Vector vec() {
        Vector v(static_cast<Eigen::Index>(length()));
        for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = f64();
        return v;
    }

    Matrix mat() {
        const auto rows = static_cast<Eigen::Index>(length());
        const auto cols = static_cast<Eigen::Index>(length());
        Matrix m(rows, cols);
        for (Eigen::Index j = 0; j < cols; ++j)
            for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = f64();
        return m;
    }

    bool at_end() const { return pos_ == data_.size(); }

private:
    std::string_view take(std::size_t n) {
        if (n > data_.size() - pos_) throw ParseError("truncated artifact");
        auto s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    std::size_t length() {
        const auto n = u64();
        if (n > data_.size()) throw ParseError("corrupt artifact length");
        return static_cast<std::size_t>(n);
    }

    template <typename T>
    T pod() {
        T v;
        auto s = take(sizeof(T));
        std::memcpy(&v, s.data(), sizeof(T));
        return v;
    }

    std::string_view data_;
    std::size_t pos_ = 0;
};

}  // namespace spectrabench
