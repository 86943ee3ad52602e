#ifndef BOXSEG_NET_HPP
#define BOXSEG_NET_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "boxseg/kernels.hpp"
#include "boxseg/matrix.hpp"
#include "boxseg/scene.hpp"

namespace boxseg {

struct NetConfig {
    std::vector<int> widths{3, 32, 64, 64};  // encoder widths, input first
    int class_count = 0;
    bool knn_context = true;
    int context_after = 2;  // concatenate neighbor-mean features after this many encoder layers
    int knn_k = 8;

    int encoder_layers() const { return static_cast<int>(widths.size()) - 1; }
    int feature_dim() const { return widths.back(); }
    void validate() const;

    friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

struct DenseLayer {
    Matrix weight;  // in x out
    std::vector<double> bias;

    friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

// Shared per-point MLP encoder with a GAP classification head and a per-point
// segmentation head. The encoder output is the feature map f_cam.
class PointNetLite {
  public:
    PointNetLite() = default;
    // He-initialized weights, zero biases.
    PointNetLite(NetConfig config, std::uint64_t seed);

    const NetConfig& config() const { return config_; }

    std::vector<DenseLayer>& encoder() { return encoder_; }
    const std::vector<DenseLayer>& encoder() const { return encoder_; }
    DenseLayer& classifier() { return classifier_; }
    const DenseLayer& classifier() const { return classifier_; }
    DenseLayer& segmenter() { return segmenter_; }
    const DenseLayer& segmenter() const { return segmenter_; }

    // Every parameter block in a fixed order: encoder weights/biases, then
    // classifier, then segmenter.
    std::vector<std::span<double>> parameter_blocks();
    std::size_t parameter_count() const;
    bool finite() const;

    friend bool operator==(const PointNetLite&, const PointNetLite&) = default;

  private:
    NetConfig config_;
    std::vector<DenseLayer> encoder_;
    DenseLayer classifier_;
    DenseLayer segmenter_;
};

// Forward activations kept for backward.
struct ForwardResult {
    std::vector<Matrix> activations;  // [0] = input, [l+1] = output of encoder layer l
    Matrix context;                   // neighbor mean of the pre-context activation
    Matrix context_input;             // [activation | context], input of the layer after the context step
    NeighborTable neighbors;
    std::vector<double> pooled;        // GAP of f_cam
    std::vector<double> class_logits;  // classifier head on the pooled feature
    Matrix seg_logits;                 // Z
    Matrix attention;                  // S = sigmoid(Z)
    Matrix probs;                      // Y = row-wise softmax(Z)
    bool valid = false;

    const Matrix& features() const { return activations.back(); }
    std::size_t size() const { return seg_logits.rows(); }
};

// inputs is N x widths[0]. When the net uses the context step and neighbors
// is null, exact kNN over the input rows is computed. Throws if any
// activation is non-finite.
ForwardResult forward(const PointNetLite& net, const Matrix& inputs, const NeighborTable* neighbors = nullptr);

// Same parameter layout as the network.
struct Gradients {
    std::vector<DenseLayer> encoder;
    DenseLayer classifier;
    DenseLayer segmenter;

    explicit Gradients(const PointNetLite& net);
    std::vector<std::span<double>> blocks();
    std::vector<std::span<const double>> blocks() const;
    void add(const Gradients& other, double scale = 1.0);
    void scale(double s);
};

// Reverse-mode pass for a loss with gradient d_class_logits on the class
// logits and d_seg_logits on Z (either may be empty/null).
Gradients backward(const PointNetLite& net, const ForwardResult& fwd, std::span<const double> d_class_logits,
                   const Matrix* d_seg_logits);

// -sum_c [y log s(z) + (1-y) log(1-s(z))] in the stable softplus form.
double sigmoid_ce_loss(std::span<const double> logits, const SubcloudTag& tag, std::vector<double>* grad = nullptr);

// Log-probabilities are clamped at log(1e-12); clamped terms carry no gradient.
inline constexpr double kProbFloor = 1e-12;

// Mean of -log Y[row, target] over the given rows of Z. Adds scale * dL/dZ
// into d_z when non-null. Returns 0 for an empty row set.
double cross_entropy_loss(const Matrix& probs, std::span<const std::uint32_t> rows, std::span<const ClassId> targets,
                          Matrix* d_z, double scale = 1.0);

enum class Optimizer { Sgd, Adam };

struct TrainConfig {
    double learning_rate = 0.01;
    double decay = 0.95;  // per-epoch learning-rate factor
    int epochs = 100;
    double alpha = 0.001;  // weight of the attention loss
    double tau = 0.8;      // confidence gate for ambiguous-point pseudo labels
    double refine_fraction = 0.2;
    std::size_t batch_points = 0;  // 0 trains on whole subclouds
    std::uint64_t seed = 0;
    Optimizer optimizer = Optimizer::Sgd;
    double weight_decay = 0.0;  // decoupled shrinkage of weight matrices (not biases) per step
    bool attention_grad_through_s = true;
    int refresh_every = 1;  // epochs between ambiguous-point relabeling
    bool rotate_augment = false;  // random rotation about z for every training step

    double learning_rate_at(int epoch) const;
    void validate() const;
};

// Plain SGD or Adam over all parameter blocks.
class ParameterUpdater {
  public:
    ParameterUpdater(const PointNetLite& net, Optimizer kind);
    void step(PointNetLite& net, const Gradients& grads, double lr, double weight_decay = 0.0);

  private:
    Optimizer kind_;
    long long t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

void save_checkpoint(const PointNetLite& net, std::ostream& out);
PointNetLite load_checkpoint(std::istream& in);
void save_checkpoint(const PointNetLite& net, const std::filesystem::path& path);
PointNetLite load_checkpoint(const std::filesystem::path& path);

}  // namespace boxseg

#endif
