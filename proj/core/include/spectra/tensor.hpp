#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

namespace spectra {

/// Dense row-major tensor of 64-bit floats. The single value type every
/// module trades in: matrices, token grids, feature maps, parameter blobs.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape);

    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<int> shape, double value);
    static Tensor from(std::vector<int> shape, std::vector<double> values);

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    std::size_t numel() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // Row-major indexed access for the common low ranks.
    double& at2(int i, int j) { return data_[static_cast<std::size_t>(i) * shape_[1] + j]; }
    double at2(int i, int j) const { return data_[static_cast<std::size_t>(i) * shape_[1] + j]; }
    double& at3(int i, int j, int k) {
        return data_[(static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k];
    }
    double at3(int i, int j, int k) const {
        return data_[(static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k];
    }
    double& at4(int i, int j, int k, int l) {
        return data_[((static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
    }
    double at4(int i, int j, int k, int l) const {
        return data_[((static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    void fill(double value);

    std::vector<double>& raw() { return data_; }
    const std::vector<double>& raw() const { return data_; }

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

std::string shape_str(const std::vector<int>& shape);

/// Throws a numeric error if any entry is NaN/Inf. `what` names the tensor in
/// the diagnostic.
void ensure_finite(const Tensor& t, const std::string& what);

double max_abs(const Tensor& t);
double max_abs_diff(const Tensor& a, const Tensor& b);
double l2_norm(const Tensor& t);

/// a += s * b
void axpy(Tensor& a, double s, const Tensor& b);

/// One named parameter: value, gradient accumulator, trainable flag.
struct ParamEntry {
    std::string name;
    Tensor value;
    Tensor grad;
    bool trainable = true;
};

/// Ordered name -> tensor map. Iteration order is insertion order, which
/// fixes checkpoint layout and update order; frozen entries never receive
/// gradient updates.
class ParameterStore {
public:
    Tensor& add(const std::string& name, Tensor init, bool trainable = true);

    bool has(const std::string& name) const { return index_.count(name) > 0; }
    Tensor& value(const std::string& name);
    const Tensor& value(const std::string& name) const;
    Tensor& grad(const std::string& name);
    const Tensor& grad(const std::string& name) const;
    bool trainable(const std::string& name) const;

    std::size_t size() const { return entries_.size(); }
    ParamEntry& entry(std::size_t i) { return entries_[i]; }
    const ParamEntry& entry(std::size_t i) const { return entries_[i]; }

    std::vector<ParamEntry>& entries() { return entries_; }
    const std::vector<ParamEntry>& entries() const { return entries_; }

    void zero_grads();

    std::size_t scalar_count(bool trainable_only = false) const;

    /// FNV-1a over values of entries selected by `trainable_filter`
    /// (0 = all, 1 = trainable only, 2 = frozen only).
    std::uint64_t checksum(int trainable_filter = 0) const;

private:
    std::vector<ParamEntry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace spectra
