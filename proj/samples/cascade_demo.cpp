// Trains the cascade on every test id but one and runs it on the held-out id.
//
//   ./clf_sample [held_out_id]

#include <iostream>
#include <string>
#include <vector>

#include "clf/pipeline.hpp"
#include "clf/synth.hpp"

int main(int argc, char** argv) {
  const std::string held_out = argc > 1 ? argv[1] : "cv_3";
  clf::RunConfig cfg;
  cfg.cnn.epochs = 10;

  const auto trials = clf::make_paper_shaped_dataset(cfg.synth, cfg.seed, cfg.dataset);
  std::vector<clf::Trial> train, test;
  for (const auto& t : trials) (t.test_id == held_out ? test : train).push_back(t);
  if (test.empty()) {
    std::cerr << "unknown test id " << held_out << '\n';
    return 1;
  }

  const auto detector = clf::train_detector(train, cfg, 1);
  const auto localizer = clf::train_localizer(train, cfg, 2);

  const clf::Trial& trial = test.front();
  const auto scores = detector.scores(trial);
  for (std::size_t f = 0; f < trial.frames.size(); f += 10) {
    std::cout << "t=" << trial.frames[f].t_s << " force=" << trial.gt_force_N[f] << " score=" << scores[f];
    if (scores[f] >= clf::kDecisionThreshold) {
      const std::size_t idx[1] = {f};
      const auto d = clf::decode(localizer.predict(trial, idx).front(), trial.grid);
      std::cout << " s_hat=" << d.s_mm << " F_hat=" << d.force_N;
    }
    std::cout << '\n';
  }
  std::cout << "true contact at s=" << *trial.gt_contact_s_mm << " mm\n";
}
