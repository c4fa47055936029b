#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "diffusion.hpp"

namespace xtal {

// Message-passing score network over the expanded atom graph. All weights
// live in one flat parameter vector with named tensor views, so the
// optimizer, checkpoint writer, and finite-difference tests all address the
// same storage.
class Denoiser : public DenoiserBase {
public:
  struct Sizes {
    int layers = 3;
    int hidden = 64;   // must be even (sinusoidal time embedding)
    int fourier = 32;  // channels per coordinate component, must be even
    int h = 0;         // element-class count
  };

  Denoiser(const Sizes& sizes, std::uint64_t init_seed);

  // Expands the basic state to atoms, runs message passing, applies the
  // constrained heads. Keeps the activations needed by backward().
  DenoiserOutput denoise(const DiffusionState& state,
                         const StructureLayout& layout,
                         const NoiseSchedule& sched) override;

  // Reverse-mode gradients of the loss through the most recent denoise()
  // call. Returns a vector aligned with params().
  VecX backward(const LossGrad& grad);

  const Sizes& sizes() const { return sizes_; }
  VecX& params() { return flat_; }
  const VecX& params() const { return flat_; }
  int nparams() const { return static_cast<int>(flat_.size()); }

  void save(const std::string& path) const;
  static Denoiser load(const std::string& path);

  // Fourier feature row for one wrapped relative coordinate component.
  static void fourier_embed_component(double f, int K, double* out);

private:
  struct Tensor {
    int rows = 0, cols = 0, offset = 0;
  };
  Tensor reg(int rows, int cols);
  Eigen::Map<MatX> view(const Tensor& t);
  Eigen::Map<const MatX> view(const Tensor& t) const;
  Eigen::Map<MatX> gview(VecX& g, const Tensor& t) const;

  Sizes sizes_;
  std::vector<Tensor> tensors_;
  VecX flat_;

  Tensor atom_W_, atom_b_, in_W_, in_b_;
  struct LayerT {
    Tensor msg_W1, msg_b1, msg_W2, msg_b2;
    Tensor upd_W1, upd_b1, upd_W2, upd_b2;
  };
  std::vector<LayerT> layers_;
  Tensor kh_W1_, kh_b1_, kh_W2_, kh_b2_;
  Tensor fh_W1_, fh_b1_, fh_W2_, fh_b2_;
  Tensor ah_W1_, ah_b1_, ah_W2_, ah_b2_;

  // Forward activations kept for backward().
  struct Cache {
    bool valid = false;
    const StructureLayout* layout = nullptr;
    int N = 0;
    std::vector<int> order;   // canonical atom order for summations
    Vec6 k;
    Vec6 free_mask;
    MatX A_in, F_in;          // h x N, 3 x N expanded inputs
    VecX tau;                 // time embedding
    MatX fuse_in;             // 2d x N
    MatX psi;                 // 3K x N^2 relative embeddings (j major)
    std::vector<MatX> H;      // layer inputs, layers+1 entries, d x N
    std::vector<MatX> msg_u1; // d x N^2 per layer
    std::vector<MatX> msg_m;  // d x N^2 per layer
    std::vector<MatX> Msum;   // d x N per layer
    std::vector<MatX> upd_u1; // d x N per layer
    VecX g;                   // mean embedding
    VecX k_u1;
    MatX f_u1, a_u1;          // d x N
    MatX f_out;               // 3 x N raw head outputs
  } cache_;
};

// One training example: symmetry frame plus clean state.
struct TrainingExample {
  StructureLayout layout;
  GroundTruth gt;
};

struct TrainOptions {
  int epochs = 100;
  double lr = 1e-3;
  double momentum = 0.9;
  std::string optimizer = "sgd";  // sgd | adam
  std::uint64_t seed = 0;
  LossOptions loss;
};

struct TrainResult {
  std::vector<double> trace;  // per-step combined loss
};

TrainResult train(Denoiser& net, const std::vector<TrainingExample>& data,
                  const NoiseSchedule& sched, const TrainOptions& opt);

// Mean combined loss over a fixed deterministic grid of (example, t, seed)
// triples; used to compare before/after training fairly.
double eval_loss(Denoiser& net, const std::vector<TrainingExample>& data,
                 const NoiseSchedule& sched, const LossOptions& opt,
                 const std::vector<int>& t_values, std::uint64_t seed_base);

}  // namespace xtal
