#pragma once

#include <algorithm>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "nifti.hpp"
#include "volume.hpp"

namespace uafuse {

struct Dataset {
    std::vector<std::string> case_names;
    std::vector<Volume> cases;

    std::size_t size() const { return cases.size(); }
};

/// Load a dataset directory of case_*/modal<k>.nii (+ optional label.nii).
inline Dataset load_dataset(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw std::runtime_error("dataset: '" + dir + "' is not a directory");

    std::vector<std::string> case_dirs;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_directory() && entry.path().filename().string().rfind("case_", 0) == 0)
            case_dirs.push_back(entry.path().string());
    std::sort(case_dirs.begin(), case_dirs.end());
    if (case_dirs.empty()) throw std::runtime_error("dataset: no case_* directories under '" + dir + "'");

    Dataset ds;
    for (const auto& cdir : case_dirs) {
        Volume vol;
        for (int m = 1;; ++m) {
            const std::string path = cdir + "/modal" + std::to_string(m) + ".nii";
            if (!fs::exists(path)) break;
            auto img = read_nifti(path);
            vol.modalities.push_back(img.as_grid());
            vol.modality_names.push_back("modal" + std::to_string(m));
            vol.spacing = img.spacing;
        }
        if (vol.modalities.empty())
            throw std::runtime_error("dataset: '" + cdir + "' holds no modal<k>.nii volumes");
        const std::string label_path = cdir + "/label.nii";
        if (fs::exists(label_path)) vol.label = read_nifti(label_path).as_labels();
        vol.validate();
        ds.case_names.push_back(fs::path(cdir).filename().string());
        ds.cases.push_back(std::move(vol));
    }
    return ds;
}

/// Load one case directory (modal<k>.nii + optional label.nii).
inline Volume load_case(const std::string& cdir) {
    namespace fs = std::filesystem;
    Volume vol;
    for (int m = 1;; ++m) {
        const std::string path = cdir + "/modal" + std::to_string(m) + ".nii";
        if (!fs::exists(path)) break;
        auto img = read_nifti(path);
        vol.modalities.push_back(img.as_grid());
        vol.modality_names.push_back("modal" + std::to_string(m));
        vol.spacing = img.spacing;
    }
    if (vol.modalities.empty()) throw std::runtime_error("case: '" + cdir + "' holds no modal<k>.nii volumes");
    const std::string label_path = cdir + "/label.nii";
    if (fs::exists(label_path)) vol.label = read_nifti(label_path).as_labels();
    vol.validate();
    return vol;
}

} // namespace uafuse
